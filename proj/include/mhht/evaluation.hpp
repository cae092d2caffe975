#pragma once

#include "mhht/assignment.hpp"
#include "mhht/core.hpp"
#include "mhht/history.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mhht {

inline constexpr double kDefaultPassThreshold = 7.5;

/// Identity-paired check of a tracker state against its annotation. Objects
/// missing from the annotation are skipped; a lost prediction always fails.
inline bool frame_passes(TrackState const& predicted, TrackState const& annotation,
                         double threshold = kDefaultPassThreshold) {
    if (predicted.size() != annotation.size()) throw DimensionMismatch("frame_passes: object counts differ");
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted.is_lost(i)) return false;
        if (annotation.is_lost(i)) continue;
        if (!((predicted.positions[i] - annotation.positions[i]).norm() <= threshold)) return false;
    }
    return true;
}

struct DetectionScore {
    std::size_t true_positives = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// One-to-one matching of detections to annotation points; pairs farther than
/// `threshold` are never matched, and among maximum-size matchings the one
/// with least total distance is taken.
inline DetectionScore match_detections(DetectionSet const& detections, DetectionSet const& annotations,
                                       double threshold) {
    if (!(threshold > 0.0)) throw InvalidConfig("match_detections: threshold must be > 0");
    auto const na = annotations.size();
    auto const nd = detections.size();
    DetectionScore s;
    if (na > 0 && nd > 0) {
        CostMatrix::Matrix block(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(nd));
        for (std::size_t i = 0; i < na; ++i) {
            for (std::size_t j = 0; j < nd; ++j) {
                double d = (annotations.points[i] - detections.points[j]).norm();
                block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d <= threshold ? d : kInf;
            }
        }
        // Leaving a point unmatched costs more than any full set of matches.
        double const unmatched = static_cast<double>(na + 1) * threshold;
        auto lap = solve_lap(CostMatrix(block, std::vector<double>(na, unmatched)));
        for (auto phi : lap.assignment) s.true_positives += phi != kGated ? 1 : 0;
    }
    s.precision = nd > 0 ? static_cast<double>(s.true_positives) / static_cast<double>(nd) : 0.0;
    s.recall = na > 0 ? static_cast<double>(s.true_positives) / static_cast<double>(na) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

/// Per-frame summed displacement and its empirical quartile/decile rank.
struct MovementQuantiles {
    std::vector<double> displacement;  ///< frame 0 has no predecessor and is 0
    std::vector<int> quartile;         ///< 1..4
    std::vector<int> decile;           ///< 1..10
};

/// Empirical q-quantile labels 1..q: 1 + floor(q * #{strictly smaller} / count).
/// Ties share the lowest label.
inline std::vector<int> quantile_labels(std::vector<double> const& values, int q) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> out(values.size());
    auto const count = static_cast<double>(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) {
        auto less = std::lower_bound(sorted.begin(), sorted.end(), values[t]) - sorted.begin();
        out[t] = 1 + static_cast<int>(std::floor(q * static_cast<double>(less) / count));
    }
    return out;
}

inline MovementQuantiles movement_quantiles(std::vector<TrackState> const& ground_truth) {
    if (ground_truth.size() < 4) throw InsufficientData("movement_quantiles: need at least 4 frames");
    MovementQuantiles mq;
    mq.displacement.assign(ground_truth.size(), 0.0);
    for (std::size_t t = 1; t < ground_truth.size(); ++t) {
        auto const& a = ground_truth[t];
        auto const& b = ground_truth[t - 1];
        if (a.size() != b.size()) throw DimensionMismatch("movement_quantiles: object count changed");
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sum += (a.positions[i] - b.positions[i]).norm();
        mq.displacement[t] = sum;
    }
    // Frame 0 is never tracked; rank frames 1.. only and label frame 0 lowest.
    std::vector<double> tracked(mq.displacement.begin() + 1, mq.displacement.end());
    auto q = quantile_labels(tracked, 4);
    auto d = quantile_labels(tracked, 10);
    mq.quartile.assign(1, 1);
    mq.decile.assign(1, 1);
    mq.quartile.insert(mq.quartile.end(), q.begin(), q.end());
    mq.decile.insert(mq.decile.end(), d.begin(), d.end());
    return mq;
}

struct StratumRate {
    std::string name;
    std::size_t frames = 0;
    std::size_t errors = 0;
    double rate = 0.0;  ///< percent
};

struct EvalReport {
    std::vector<std::size_t> frames;
    std::vector<bool> passed;
    std::vector<std::size_t> error_frames;
    std::size_t frame_count = 0;
    std::size_t error_count = 0;
    double error_rate = 0.0;  ///< percent
    std::vector<StratumRate> strata;

    [[nodiscard]] std::optional<StratumRate> stratum(std::string const& name) const {
        for (auto const& s : strata) {
            if (s.name == name) return s;
        }
        return std::nullopt;
    }
};

inline double percent(std::size_t errors, std::size_t frames) {
    return frames == 0 ? 0.0 : 100.0 * static_cast<double>(errors) / static_cast<double>(frames);
}

/// Scores every tracked frame's proposal against the annotation for that
/// frame number. A failed frame counts once; the tracker is assumed to have
/// been reset from the annotation afterwards, as track_sequence does in
/// corrections mode. Strata come from movement labels indexed by frame.
inline EvalReport score_run(TrackHistory const& history, std::vector<TrackState> const& annotations,
                            MovementQuantiles const* strata = nullptr,
                            double threshold = kDefaultPassThreshold) {
    EvalReport r;
    std::map<std::string, StratumRate> by_name;
    auto bump = [&](std::string const& name, bool failed) {
        auto& s = by_name[name];
        s.name = name;
        ++s.frames;
        s.errors += failed ? 1 : 0;
    };
    for (auto const& rec : history.frames) {
        if (rec.frame >= annotations.size()) throw DimensionMismatch("score_run: no annotation for a tracked frame");
        if (strata && rec.frame >= strata->quartile.size()) {
            throw DimensionMismatch("score_run: no movement label for a tracked frame");
        }
        bool ok = frame_passes(rec.proposed, annotations[rec.frame], threshold);
        r.frames.push_back(rec.frame);
        r.passed.push_back(ok);
        if (!ok) r.error_frames.push_back(rec.frame);
        if (strata) {
            bump("Q" + std::to_string(strata->quartile[rec.frame]), !ok);
            bump("D" + std::to_string(strata->decile[rec.frame]), !ok);
        }
    }
    r.frame_count = r.frames.size();
    r.error_count = r.error_frames.size();
    r.error_rate = percent(r.error_count, r.frame_count);
    // Fixed order: quartiles, then deciles.
    for (int q = 1; q <= 4; ++q) {
        auto it = by_name.find("Q" + std::to_string(q));
        if (it != by_name.end()) r.strata.push_back(it->second);
    }
    for (int d = 1; d <= 10; ++d) {
        auto it = by_name.find("D" + std::to_string(d));
        if (it != by_name.end()) r.strata.push_back(it->second);
    }
    for (auto& s : r.strata) s.rate = percent(s.errors, s.frames);
    return r;
}

/// One benchmark cell: the axes it was run under plus its report.
struct EvalRow {
    std::string model;
    std::size_t K = 1;
    std::size_t N = 1;
    double gate = 0.0;
    std::string regime;
    std::uint64_t seed = 0;
    EvalReport report;
};

inline void write_eval_csv_header(std::ostream& os) {
    os << "model,K,N,gate,regime,seed,stratum,frames,errors,rate\n";
}

/// One line for the whole run ("all") and one per stratum.
inline void write_eval_csv_rows(std::ostream& os, EvalRow const& row) {
    auto line = [&](std::string const& stratum, std::size_t frames, std::size_t errors, double rate) {
        os << row.model << ',' << row.K << ',' << row.N << ',' << row.gate << ',' << row.regime << ',' << row.seed
           << ',' << stratum << ',' << frames << ',' << errors << ',' << std::fixed << std::setprecision(4) << rate
           << std::defaultfloat << '\n';
    };
    line("all", row.report.frame_count, row.report.error_count, row.report.error_rate);
    for (auto const& s : row.report.strata) line(s.name, s.frames, s.errors, s.rate);
}

}  // namespace mhht
