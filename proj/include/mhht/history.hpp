#pragma once

#include "mhht/core.hpp"

#include <vector>

namespace mhht {

/// Per-step search counters.
struct StepDiagnostics {
    std::size_t frame = 0;
    std::size_t depth = 0;                  ///< lookahead actually used (N after truncation)
    std::size_t nodes_expanded = 0;         ///< hypotheses completed and scored
    std::size_t pruned_by_gate = 0;         ///< track/detection pairs excluded by the hard gate
    std::size_t pruned_by_intersection = 0;
    std::size_t pruned_by_bound = 0;
    double chosen_path_cost = 0.0;
    std::vector<double> best_cost_per_depth;  ///< cheapest path cost reaching each depth (1..depth)
    bool complete_path = true;              ///< false when only a partial path survived pruning
    bool intersection_fallback = false;     ///< every depth-1 child self-intersected
};

/// One depth-1 alternative considered for the committed frame.
struct BranchSummary {
    Hypothesis hypothesis;
    bool self_intersecting = false;
    double best_path_cost = 0.0;  ///< +inf when no complete path through it was found (or it was bounded away)
};

struct FrameRecord {
    std::size_t frame = 0;
    TrackState proposed;   ///< tracker output before any correction
    TrackState committed;  ///< state carried to the next frame
    Hypothesis chosen;
    StepDiagnostics diagnostics;
    bool error = false;    ///< failed the correction test and was reset
};

struct TrackHistory {
    TrackState initial;
    std::vector<FrameRecord> frames;

    [[nodiscard]] std::vector<std::size_t> error_frames() const {
        std::vector<std::size_t> out;
        for (auto const& f : frames) {
            if (f.error) out.push_back(f.frame);
        }
        return out;
    }

    [[nodiscard]] std::vector<TrackState> committed_states() const {
        std::vector<TrackState> out;
        out.reserve(frames.size() + 1);
        out.push_back(initial);
        for (auto const& f : frames) out.push_back(f.committed);
        return out;
    }

    friend bool operator==(TrackHistory const& a, TrackHistory const& b) {
        if (!(a.initial == b.initial) || a.frames.size() != b.frames.size()) return false;
        for (std::size_t i = 0; i < a.frames.size(); ++i) {
            auto const& x = a.frames[i];
            auto const& y = b.frames[i];
            if (x.frame != y.frame || !(x.proposed == y.proposed) || !(x.committed == y.committed) ||
                x.error != y.error || x.chosen.assignment != y.chosen.assignment ||
                x.chosen.cumulative_cost != y.chosen.cumulative_cost) {
                return false;
            }
        }
        return true;
    }
};

}  // namespace mhht
