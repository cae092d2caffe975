#pragma once

#include "mhht/io.hpp"
#include "mhht/search.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mhht {

/// The archive's frame-0 annotation, which every run starts from.
inline TrackState initial_state(SequenceArchive const& archive) {
    auto it = archive.annotations.find(0);
    if (it == archive.annotations.end()) throw InvalidConfig("archive has no frame-0 annotation to start from");
    return it->second;
}

/// Detections for frames 1.., the frames a run tracks.
inline std::vector<DetectionSet> tracked_detections(SequenceArchive const& archive) {
    if (archive.detections.size() < 2) throw InsufficientData("archive needs at least 2 frames to track");
    return {archive.detections.begin() + 1, archive.detections.end()};
}

/// Frame-by-frame review: propose with search.step, then either accept the
/// proposal or replace it with a correction, and move on. Accepting every
/// frame reproduces track_sequence without an oracle; correcting a frame with
/// its annotation matches the corrections-oracle run at that frame.
class ReviewSession {
public:
    ReviewSession(SequenceArchive archive, SearchConfig cfg)
        : archive_(std::move(archive)), cfg_(std::move(cfg)) {
        archive_.validate();
        cfg_.validate();
        detections_ = tracked_detections(archive_);
        history_.initial = initial_state(archive_);
        history_.initial.validate(cfg_.model.graph.vertex_count());
        propose();
    }

    [[nodiscard]] bool done() const { return history_.frames.size() == detections_.size(); }

    /// Frame awaiting review, or frame_count when every frame is done.
    [[nodiscard]] std::size_t current_frame() const {
        return done() ? archive_.manifest.frame_count : detections_[history_.frames.size()].frame;
    }

    [[nodiscard]] TrackState const& previous_state() const {
        return history_.frames.empty() ? history_.initial : history_.frames.back().committed;
    }

    [[nodiscard]] std::optional<StepResult> const& proposal() const { return proposal_; }
    [[nodiscard]] TrackHistory const& history() const { return history_; }
    [[nodiscard]] SearchConfig const& config() const { return cfg_; }
    [[nodiscard]] SequenceArchive const& archive() const { return archive_; }

    void accept() {
        require_pending();
        commit(proposal_->state, false);
    }

    /// Commits a full position list as the frame's state. Every object counts
    /// as annotated, as in the corrections oracle.
    void correct(std::vector<Vec3> const& positions) {
        require_pending();
        auto const n = cfg_.model.graph.vertex_count();
        if (positions.size() != n) {
            throw DimensionMismatch("correction has " + std::to_string(positions.size()) + " positions, expected " +
                                    std::to_string(n));
        }
        for (auto const& p : positions) {
            if (!is_finite(p)) throw InvalidConfig("correction has a non-finite coordinate");
        }
        commit(apply_correction(proposal_->state, TrackState(current_frame(), positions)), true);
    }

    /// Re-enters at an already reviewed (or the current) frame, dropping it and
    /// everything after it from the history.
    void seek(std::size_t frame) {
        auto const first = detections_.front().frame;
        if (frame < first || frame > current_frame() || frame >= archive_.manifest.frame_count) {
            throw std::out_of_range("seek: frame " + std::to_string(frame) + " is not reviewable");
        }
        history_.frames.resize(frame - first);
        propose();
    }

private:
    void require_pending() const {
        if (done()) throw std::logic_error("every frame has been reviewed");
    }

    void propose() {
        if (done()) {
            proposal_.reset();
            return;
        }
        std::span<DetectionSet const> rest(detections_);
        proposal_ = step(previous_state(), rest.subspan(history_.frames.size()), cfg_);
    }

    void commit(TrackState committed, bool corrected) {
        FrameRecord rec;
        rec.frame = current_frame();
        rec.proposed = proposal_->state;
        rec.committed = std::move(committed);
        rec.chosen = proposal_->chosen;
        rec.diagnostics = proposal_->diagnostics;
        rec.error = corrected;
        history_.frames.push_back(std::move(rec));
        propose();
    }

    SequenceArchive archive_;
    SearchConfig cfg_;
    std::vector<DetectionSet> detections_;
    TrackHistory history_;
    std::optional<StepResult> proposal_;
};

// ---- JSON payloads ----------------------------------------------------------

/// GET /state. Alternatives are the depth-1 hypotheses ranked by the best path
/// cost through them, at most K of them.
inline Json state_payload(ReviewSession const& s) {
    Json edges = Json::array();
    for (auto const& e : s.config().model.graph.edges()) edges.push_back({e.u, e.v});
    Json j = {{"frame", s.current_frame()},
              {"frame_count", s.archive().manifest.frame_count},
              {"done", s.done()},
              {"labels", s.config().model.graph.labels()},
              {"edges", edges},
              {"previous", to_json(s.previous_state())}};
    if (!s.proposal()) {
        j["proposal"] = nullptr;
        j["alternatives"] = Json::array();
        j["detections"] = Json::array();
        return j;
    }
    auto const& p = *s.proposal();
    j["proposal"] = to_json(p.state);
    j["cost"] = io_detail::number(p.diagnostics.chosen_path_cost);
    std::vector<BranchSummary> branches = p.branches;
    std::stable_sort(branches.begin(), branches.end(), [](BranchSummary const& a, BranchSummary const& b) {
        return a.best_path_cost < b.best_path_cost;
    });
    if (branches.size() > s.config().K) branches.resize(s.config().K);
    Json alts = Json::array();
    for (std::size_t r = 0; r < branches.size(); ++r) {
        auto const& b = branches[r];
        alts.push_back({{"rank", r},
                        {"cost", io_detail::number(b.best_path_cost)},
                        {"step_cost", io_detail::number(b.hypothesis.cumulative_cost)},
                        {"unary_cost", io_detail::number(b.hypothesis.unary_cost)},
                        {"assignment", b.hypothesis.assignment},
                        {"self_intersecting", b.self_intersecting},
                        {"state", to_json(b.hypothesis.completed_state)}});
    }
    j["alternatives"] = alts;
    auto const& dets = s.archive().detections[s.current_frame()];
    j["detections"] = io_detail::points(dets.points);
    return j;
}

/// GET /history.
inline Json history_payload(TrackHistory const& h) {
    Json frames = Json::array();
    for (auto const& r : h.frames) frames.push_back(to_json(r));
    return {{"format", kHistoryFormat}, {"version", kFormatVersion}, {"initial", to_json(h.initial)}, {"frames", frames}};
}

inline TrackHistory history_from_payload(Json const& j) {
    TrackHistory h;
    h.initial = track_state_from_json(io_detail::field(j, "initial"));
    for (auto const& f : io_detail::field(j, "frames")) h.frames.push_back(frame_record_from_json(f));
    return h;
}

}  // namespace mhht
