#pragma once

#include "mhht/assignment.hpp"
#include "mhht/association.hpp"
#include "mhht/core.hpp"
#include "mhht/evaluation.hpp"
#include "mhht/geometry.hpp"
#include "mhht/history.hpp"
#include "mhht/interpolation.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

namespace mhht {

enum class SearchRegime { explicit_tree, kbest_of_k };

inline char const* to_string(SearchRegime r) { return r == SearchRegime::explicit_tree ? "explicit" : "kbest"; }

inline SearchRegime search_regime_from_string(std::string const& s) {
    if (s == "explicit") return SearchRegime::explicit_tree;
    if (s == "kbest") return SearchRegime::kbest_of_k;
    throw InvalidConfig("unknown search regime '" + s + "'");
}

struct SearchConfig {
    std::size_t K = 1;  ///< hypotheses per expansion; kUnlimited enumerates everything
    std::size_t N = 1;  ///< lookahead frames; 1 means commit greedily
    SearchRegime regime = SearchRegime::explicit_tree;
    AssociationModel model;
    GateConfig gates = GateConfig::uniform(7.5);
    bool prune_intersections = true;

    void validate() const {
        if (K < 1) throw InvalidConfig("SearchConfig: K must be >= 1");
        if (N < 1) throw InvalidConfig("SearchConfig: N must be >= 1");
        model.validate();
        gates.validate(model.graph.vertex_count());
    }
};

struct StepResult {
    TrackState state;  ///< committed-candidate state for the first lookahead frame
    Hypothesis chosen;
    StepDiagnostics diagnostics;
    std::vector<BranchSummary> branches;  ///< depth-1 alternatives in cost order
};

namespace detail {

struct Child {
    Hypothesis hyp;
    bool intersects = false;
};

class StepSearch {
public:
    StepSearch(TrackState const& prev, std::span<DetectionSet const> future, SearchConfig const& cfg)
        : prev_(prev), future_(future), cfg_(cfg), depth_(std::min(cfg.N, future.size())) {
        diag_.depth = depth_;
        diag_.frame = future.front().frame;
        diag_.best_cost_per_depth.assign(depth_, kInf);
        deepest_.assign(depth_ + 1, Partial{});
    }

    StepResult run() {
        if (cfg_.regime == SearchRegime::explicit_tree) {
            run_explicit();
        } else {
            run_kbest();
        }
        return finish();
    }

private:
    struct Partial {
        double cost = kInf;
        std::size_t branch = 0;
    };

    double unary_factor() const { return cfg_.model.unary_factor(); }

    // Depth-1 children are scored even when they self-intersect so the
    // all-pruned fallback can rank them.
    Child make_child(TrackState const& parent, DetectionSet const& det, RankedAssignment const& r,
                     double parent_path, bool score_pruned = false) {
        Child c;
        c.hyp.assignment = r.assignment;
        c.hyp.completed_state = complete_state(parent, r.assignment, det, cfg_.model.graph);
        c.hyp.unary_cost = r.objective;
        c.intersects = cfg_.prune_intersections && segments_intersect(c.hyp.completed_state, cfg_.model.graph);
        if (!c.intersects || score_pruned) {
            c.hyp.model_cost = evaluate_state(cfg_.model, c.hyp.completed_state, parent, r.objective);
            c.hyp.cumulative_cost = parent_path + c.hyp.model_cost;
        }
        ++diag_.nodes_expanded;
        if (c.intersects) ++diag_.pruned_by_intersection;
        return c;
    }

    void reached(std::size_t depth, double path, std::size_t branch) {
        diag_.best_cost_per_depth[depth - 1] = std::min(diag_.best_cost_per_depth[depth - 1], path);
        if (path < deepest_[depth].cost) deepest_[depth] = Partial{path, branch};
    }

    void record_branch_path(std::size_t branch, double path) {
        branches_[branch].best_path_cost = std::min(branches_[branch].best_path_cost, path);
    }

    // ---- explicit tree: depth-first branch and bound -------------------------

    void run_explicit() {
        CostMatrix c = build_cost_matrix(prev_, future_[0], cfg_.gates);
        diag_.pruned_by_gate += c.gated_pairs();
        RankedAssignmentStream stream(c);
        std::vector<Child> kids;
        for (std::size_t k = 0; k < cfg_.K; ++k) {
            auto r = stream.next();
            if (!r) break;
            kids.push_back(make_child(prev_, future_[0], *r, 0.0, true));
        }
        // Depth-1 alternatives, in model-cost order.
        std::stable_sort(kids.begin(), kids.end(),
                         [](Child const& a, Child const& b) { return a.hyp.model_cost < b.hyp.model_cost; });
        for (auto& k : kids) {
            branches_.push_back(BranchSummary{k.hyp, k.intersects, kInf});
        }
        bool any_valid = std::any_of(kids.begin(), kids.end(), [](Child const& k) { return !k.intersects; });
        if (!any_valid) {
            diag_.intersection_fallback = true;
            return;
        }
        for (std::size_t b = 0; b < kids.size(); ++b) {
            if (kids[b].intersects) continue;
            double path = kids[b].hyp.cumulative_cost;
            if (path >= incumbent_) {
                ++diag_.pruned_by_bound;
                continue;
            }
            reached(1, path, b);
            descend(kids[b].hyp.completed_state, 1, path, b);
        }
    }

    void descend(TrackState const& state, std::size_t depth, double path, std::size_t branch) {
        if (depth == depth_) {
            record_branch_path(branch, path);
            if (path < incumbent_) {
                incumbent_ = path;
                incumbent_branch_ = branch;
            }
            return;
        }
        DetectionSet const& det = future_[depth];
        CostMatrix c = build_cost_matrix(state, det, cfg_.gates);
        diag_.pruned_by_gate += c.gated_pairs();
        RankedAssignmentStream stream(c);
        std::vector<Child> kids;
        double const w = unary_factor();
        for (std::size_t k = 0; k < cfg_.K; ++k) {
            auto r = stream.next();
            if (!r) break;
            // Model costs are >= w * unary, and the stream is sorted by unary.
            if (path + w * r->objective >= incumbent_) {
                ++diag_.pruned_by_bound;
                break;
            }
            auto child = make_child(state, det, *r, path);
            if (!child.intersects) kids.push_back(std::move(child));
        }
        std::stable_sort(kids.begin(), kids.end(),
                         [](Child const& a, Child const& b) { return a.hyp.model_cost < b.hyp.model_cost; });
        for (auto& kid : kids) {
            double next = kid.hyp.cumulative_cost;
            if (next >= incumbent_) {
                ++diag_.pruned_by_bound;
                continue;
            }
            reached(depth + 1, next, branch);
            descend(kid.hyp.completed_state, depth + 1, next, branch);
        }
    }

    // ---- K best of K: one shared ranking per level ----------------------------

    struct FrontierNode {
        TrackState state;
        double path = 0.0;
        std::size_t branch = 0;
    };

    void run_kbest() {
        // Depth 1 is a single-parent ranking, identical to the explicit tree's.
        CostMatrix c = build_cost_matrix(prev_, future_[0], cfg_.gates);
        diag_.pruned_by_gate += c.gated_pairs();
        RankedAssignmentStream stream(c);
        std::vector<Child> kids;
        for (std::size_t k = 0; k < cfg_.K; ++k) {
            auto r = stream.next();
            if (!r) break;
            kids.push_back(make_child(prev_, future_[0], *r, 0.0, true));
        }
        std::stable_sort(kids.begin(), kids.end(),
                         [](Child const& a, Child const& b) { return a.hyp.model_cost < b.hyp.model_cost; });
        std::vector<FrontierNode> frontier;
        for (std::size_t b = 0; b < kids.size(); ++b) {
            branches_.push_back(BranchSummary{kids[b].hyp, kids[b].intersects, kInf});
            if (kids[b].intersects) continue;
            reached(1, kids[b].hyp.cumulative_cost, b);
            frontier.push_back({kids[b].hyp.completed_state, kids[b].hyp.cumulative_cost, b});
        }
        if (frontier.empty()) {
            diag_.intersection_fallback = true;
            return;
        }
        for (std::size_t depth = 1; depth < depth_ && !frontier.empty(); ++depth) {
            DetectionSet const& det = future_[depth];
            std::vector<CostMatrix> problems;
            std::vector<double> offsets;
            for (auto const& node : frontier) {
                problems.push_back(build_cost_matrix(node.state, det, cfg_.gates));
                diag_.pruned_by_gate += problems.back().gated_pairs();
                offsets.push_back(node.path);
            }
            RankedAssignmentStream pooled(std::move(problems), std::move(offsets));
            std::vector<FrontierNode> next;
            for (std::size_t k = 0; k < cfg_.K; ++k) {
                auto r = pooled.next();
                if (!r) break;
                auto const& parent = frontier[r->parent];
                auto child = make_child(parent.state, det, *r, parent.path);
                if (child.intersects) continue;
                reached(depth + 1, child.hyp.cumulative_cost, parent.branch);
                next.push_back({std::move(child.hyp.completed_state), child.hyp.cumulative_cost, parent.branch});
            }
            frontier = std::move(next);
        }
        for (auto const& node : frontier) {
            record_branch_path(node.branch, node.path);
            if (node.path < incumbent_) {
                incumbent_ = node.path;
                incumbent_branch_ = node.branch;
            }
        }
    }

    // ---- result ----------------------------------------------------------------

    StepResult finish() {
        StepResult out;
        std::size_t branch = 0;
        if (diag_.intersection_fallback) {
            // All depth-1 children self-intersect: commit the cheapest anyway.
            diag_.complete_path = false;
            branch = 0;
            diag_.chosen_path_cost = branches_[0].hypothesis.model_cost;
        } else if (incumbent_ < kInf) {
            branch = incumbent_branch_;
            diag_.chosen_path_cost = incumbent_;
        } else {
            // No complete path survived pruning: take the cheapest of the deepest partial paths.
            diag_.complete_path = false;
            std::size_t d = depth_;
            while (d > 1 && deepest_[d].cost == kInf) --d;
            branch = deepest_[d].branch;
            diag_.chosen_path_cost = deepest_[d].cost;
        }
        out.chosen = branches_[branch].hypothesis;
        out.chosen.cumulative_cost = diag_.chosen_path_cost;
        out.state = out.chosen.completed_state;
        out.diagnostics = diag_;
        out.branches = std::move(branches_);
        return out;
    }

    TrackState const& prev_;
    std::span<DetectionSet const> future_;
    SearchConfig const& cfg_;
    std::size_t depth_;
    double incumbent_ = kInf;
    std::size_t incumbent_branch_ = 0;
    std::vector<Partial> deepest_;
    std::vector<BranchSummary> branches_;
    StepDiagnostics diag_;
};

}  // namespace detail

/// Commits frame t: searches N lookahead frames (fewer near the sequence end)
/// and returns the depth-1 state on the cheapest path.
inline StepResult step(TrackState const& prev, std::span<DetectionSet const> future_detections,
                       SearchConfig const& cfg) {
    if (future_detections.empty()) throw InvalidConfig("step: at least one detection frame required");
    cfg.validate();
    prev.validate(cfg.model.graph.vertex_count());
    return detail::StepSearch(prev, future_detections, cfg).run();
}

inline StepResult step(TrackState const& prev, std::vector<DetectionSet> const& future_detections,
                       SearchConfig const& cfg) {
    return step(prev, std::span<DetectionSet const>(future_detections), cfg);
}

/// Names accepted by select_model: "gnn" plus every association model.
inline bool is_model_name(std::string const& name) {
    return name == "gnn" || name == "mht" || name == "embryo" || name == "posture" || name == "movement" ||
           name == "pm";
}

/// "gnn" is the unary model with K = N = 1; any other name picks that
/// association model and leaves K and N alone.
inline void select_model(SearchConfig& cfg, std::string const& name) {
    if (name == "gnn") {
        cfg.model.variant = ModelVariant::mht;
        cfg.K = 1;
        cfg.N = 1;
    } else {
        cfg.model.variant = model_variant_from_string(name);
    }
}

/// Ground-truth annotations (indexed by frame number) used to detect and
/// repair tracking failures.
struct CorrectionsOracle {
    std::vector<TrackState> annotations;
    double threshold = kDefaultPassThreshold;
};

/// Annotation reset: annotated objects take the annotation, objects missing
/// from the annotation keep the tracker's proposal.
inline TrackState apply_correction(TrackState const& proposed, TrackState const& annotation) {
    TrackState out = proposed;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (annotation.is_lost(i)) continue;
        out.positions[i] = annotation.positions[i];
        out.status[i] = ObjectStatus::tracked;
    }
    return out;
}

/// Tracks every frame of `detections` starting from `initial`. With an oracle,
/// frames whose proposal fails the pass test are recorded as errors and reset
/// to the annotation before tracking continues.
inline TrackHistory track_sequence(TrackState const& initial, std::vector<DetectionSet> const& detections,
                                   SearchConfig const& cfg, CorrectionsOracle const* corrections = nullptr) {
    if (detections.empty()) throw InvalidConfig("track_sequence: no detection frames");
    cfg.validate();
    initial.validate(cfg.model.graph.vertex_count());
    TrackHistory h;
    h.initial = initial;
    h.frames.reserve(detections.size());
    TrackState current = initial;
    std::span<DetectionSet const> all(detections);
    for (std::size_t t = 0; t < detections.size(); ++t) {
        auto result = detail::StepSearch(current, all.subspan(t), cfg).run();
        FrameRecord rec;
        rec.frame = detections[t].frame;
        rec.proposed = result.state;
        rec.committed = result.state;
        rec.chosen = std::move(result.chosen);
        rec.diagnostics = std::move(result.diagnostics);
        if (corrections) {
            if (rec.frame >= corrections->annotations.size()) {
                throw DimensionMismatch("track_sequence: no annotation for frame " + std::to_string(rec.frame));
            }
            auto const& ann = corrections->annotations[rec.frame];
            if (!frame_passes(rec.proposed, ann, corrections->threshold)) {
                rec.error = true;
                rec.committed = apply_correction(rec.proposed, ann);
            }
        }
        current = rec.committed;
        h.frames.push_back(std::move(rec));
    }
    return h;
}

}  // namespace mhht
