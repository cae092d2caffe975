#pragma once

#include "mhht/core.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace mhht {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Gated association costs: an n x (m + n) matrix whose first m columns hold
/// track-to-detection costs and whose last n columns hold the gate block
/// (d_i on the diagonal, +inf elsewhere). Forbidden cells are +inf.
class CostMatrix {
public:
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    CostMatrix() = default;

    CostMatrix(Matrix const& detection_block, std::vector<double> const& gates)
        : tracks_(static_cast<std::size_t>(detection_block.rows())),
          detections_(static_cast<std::size_t>(detection_block.cols())) {
        if (gates.size() != tracks_) throw DimensionMismatch("CostMatrix: one gate per track required");
        entries_ = Matrix::Constant(static_cast<Eigen::Index>(tracks_),
                                    static_cast<Eigen::Index>(detections_ + tracks_), kInf);
        for (std::size_t i = 0; i < tracks_; ++i) {
            for (std::size_t j = 0; j < detections_; ++j) {
                double c = detection_block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (std::isnan(c) || c < 0.0) throw InvalidConfig("CostMatrix: costs must be >= 0 or +inf");
                at(i, j) = c;
            }
            if (!(gates[i] > 0.0) || !std::isfinite(gates[i])) {
                throw InvalidConfig("CostMatrix: gates must be finite and > 0");
            }
            at(i, detections_ + i) = gates[i];
        }
    }

    [[nodiscard]] std::size_t tracks() const { return tracks_; }
    [[nodiscard]] std::size_t detections() const { return detections_; }
    [[nodiscard]] std::size_t columns() const { return detections_ + tracks_; }
    [[nodiscard]] Matrix const& entries() const { return entries_; }

    [[nodiscard]] double operator()(std::size_t i, std::size_t col) const {
        return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col));
    }

    [[nodiscard]] double gate(std::size_t i) const { return (*this)(i, detections_ + i); }

    [[nodiscard]] std::size_t column_for(std::size_t track, std::size_t phi) const {
        return phi == kGated ? detections_ + track : phi - 1;
    }

    [[nodiscard]] std::size_t phi_for(std::size_t col) const { return col < detections_ ? col + 1 : kGated; }

    /// Row-order sum of C_{i, phi_i}; +inf for assignments touching forbidden cells.
    [[nodiscard]] double objective(Assignment const& phi) const {
        if (phi.size() != tracks_) throw DimensionMismatch("CostMatrix::objective: wrong assignment length");
        double total = 0.0;
        for (std::size_t i = 0; i < tracks_; ++i) total += (*this)(i, column_for(i, phi[i]));
        return total;
    }

    /// Number of track/detection pairs excluded by the hard gate.
    [[nodiscard]] std::size_t gated_pairs() const {
        std::size_t count = 0;
        for (std::size_t i = 0; i < tracks_; ++i) {
            for (std::size_t j = 0; j < detections_; ++j) count += std::isinf((*this)(i, j)) ? 1 : 0;
        }
        return count;
    }

private:
    double& at(std::size_t i, std::size_t col) {
        return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col));
    }

    std::size_t tracks_ = 0;
    std::size_t detections_ = 0;
    Matrix entries_;
};

/// Euclidean track-to-detection costs with hard gating: distances beyond d_i
/// become +inf.
inline CostMatrix build_cost_matrix(TrackState const& predicted, DetectionSet const& detections,
                                    GateConfig const& gates) {
    auto const n = predicted.size();
    auto const m = detections.size();
    gates.validate(n);
    CostMatrix::Matrix block(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    std::vector<double> radii(n);
    for (std::size_t i = 0; i < n; ++i) {
        radii[i] = gates.radius(i);
        for (std::size_t j = 0; j < m; ++j) {
            double d = (predicted.positions[i] - detections.points[j]).norm();
            block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d > radii[i] ? kInf : d;
        }
    }
    return CostMatrix(block, radii);
}

struct LapResult {
    Assignment assignment;
    double objective = 0.0;
};

struct RankedAssignment {
    std::size_t parent = 0;  ///< index of the problem this came from (k_best_of_k)
    Assignment assignment;
    double objective = 0.0;  ///< sum_i C_{i, phi_i}
    double total = 0.0;      ///< parent offset + objective
};

using RankedAssignments = std::vector<RankedAssignment>;

namespace detail {

// Square LAP state: row/column matches and dual potentials.
struct SquareSolution {
    std::vector<int> col4row;
    std::vector<int> row4col;
    std::vector<double> u;
    std::vector<double> v;
};

struct LapWorkspace {
    std::vector<int> path;
    std::vector<int> remaining;
    std::vector<double> shortest;
    std::vector<char> scanned_rows;
    std::vector<char> scanned_cols;

    void resize(std::size_t dim) {
        path.assign(dim, -1);
        remaining.resize(dim);
        shortest.resize(dim);
        scanned_rows.resize(dim);
        scanned_cols.resize(dim);
    }
};

// Shortest augmenting path from an unassigned row, keeping the duals feasible
// (reduced costs >= 0, matched cells tight). Returns false when no finite
// augmenting path exists.
inline bool augment_row(double const* cost, std::size_t dim, SquareSolution& s, std::size_t start_row,
                        LapWorkspace& ws) {
    if (ws.path.size() != dim) ws.resize(dim);
    std::size_t num_remaining = dim;
    for (std::size_t it = 0; it < dim; ++it) ws.remaining[it] = static_cast<int>(dim - 1 - it);
    std::fill(ws.scanned_rows.begin(), ws.scanned_rows.end(), 0);
    std::fill(ws.scanned_cols.begin(), ws.scanned_cols.end(), 0);
    std::fill(ws.shortest.begin(), ws.shortest.end(), kInf);

    double min_val = 0.0;
    std::size_t i = start_row;
    int sink = -1;
    while (sink == -1) {
        ws.scanned_rows[i] = 1;
        int index = -1;
        double lowest = kInf;
        double const* row = cost + i * dim;
        for (std::size_t it = 0; it < num_remaining; ++it) {
            auto const j = static_cast<std::size_t>(ws.remaining[it]);
            double r = min_val + row[j] - s.u[i] - s.v[j];
            if (r < ws.shortest[j]) {
                ws.path[j] = static_cast<int>(i);
                ws.shortest[j] = r;
            }
            if (ws.shortest[j] < lowest || (ws.shortest[j] == lowest && s.row4col[j] == -1)) {
                lowest = ws.shortest[j];
                index = static_cast<int>(it);
            }
        }
        min_val = lowest;
        if (index < 0 || min_val == kInf) return false;
        auto const j = static_cast<std::size_t>(ws.remaining[static_cast<std::size_t>(index)]);
        if (s.row4col[j] == -1) {
            sink = static_cast<int>(j);
        } else {
            i = static_cast<std::size_t>(s.row4col[j]);
        }
        ws.scanned_cols[j] = 1;
        ws.remaining[static_cast<std::size_t>(index)] = ws.remaining[--num_remaining];
    }

    s.u[start_row] += min_val;
    for (std::size_t r = 0; r < dim; ++r) {
        if (ws.scanned_rows[r] && r != start_row) {
            s.u[r] += min_val - ws.shortest[static_cast<std::size_t>(s.col4row[r])];
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        if (ws.scanned_cols[c]) s.v[c] -= min_val - ws.shortest[c];
    }

    auto j = static_cast<std::size_t>(sink);
    while (true) {
        auto const r = static_cast<std::size_t>(ws.path[j]);
        s.row4col[j] = static_cast<int>(r);
        auto const prev = s.col4row[r];
        s.col4row[r] = static_cast<int>(j);
        if (r == start_row) break;
        j = static_cast<std::size_t>(prev);
    }
    return true;
}

inline std::optional<SquareSolution> solve_square(double const* cost, std::size_t dim, LapWorkspace& ws) {
    SquareSolution s;
    s.col4row.assign(dim, -1);
    s.row4col.assign(dim, -1);
    s.u.assign(dim, 0.0);
    s.v.assign(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
        if (!augment_row(cost, dim, s, r, ws)) return std::nullopt;
    }
    return s;
}

// Square embedding of an n x (m + n) gated matrix: the n real rows followed by
// m zero-cost dummy rows that absorb unused columns.
inline std::vector<double> square_embedding(CostMatrix const& c) {
    auto const n = c.tracks();
    auto const dim = c.columns();
    std::vector<double> sq(dim * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) sq[i * dim + j] = c(i, j);
    }
    return sq;
}

inline bool lex_less(Assignment const& a, Assignment const& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

/// Lazy Murty enumeration of assignments in nondecreasing (offset + objective)
/// order over one or more gated problems. Equal totals come out ordered by
/// (problem index, objective, lexicographic phi).
class RankedAssignmentStream {
public:
    explicit RankedAssignmentStream(CostMatrix const& problem) : RankedAssignmentStream({problem}, {0.0}) {}

    RankedAssignmentStream(std::vector<CostMatrix> problems, std::vector<double> offsets) {
        if (problems.size() != offsets.size()) {
            throw DimensionMismatch("RankedAssignmentStream: one offset per problem required");
        }
        problems_.reserve(problems.size());
        for (std::size_t p = 0; p < problems.size(); ++p) {
            Problem prob;
            prob.dim = problems[p].columns();
            prob.square = detail::square_embedding(problems[p]);
            prob.offset = offsets[p];
            prob.base = std::move(problems[p]);
            problems_.push_back(std::move(prob));
        }
        for (std::size_t p = 0; p < problems_.size(); ++p) push_root(p);
    }

    /// Next assignment in rank order, or nullopt once every feasible
    /// assignment has been produced.
    std::optional<RankedAssignment> next() {
        if (ready_pos_ < ready_.size()) return std::move(ready_[ready_pos_++]);
        ready_.clear();
        ready_pos_ = 0;

        std::vector<Node> batch;
        double batch_key = 0.0;
        while (!heap_.empty()) {
            Node const& top = heap_.front();
            if (!batch.empty() && (top.key > batch_key || batch.size() >= kMaxTieBatch)) break;
            Node node = pop();
            if (!node.exact) {
                resolve(std::move(node));
                continue;
            }
            if (batch.empty()) batch_key = node.key;
            split(node);
            batch.push_back(std::move(node));
        }
        if (batch.empty()) return std::nullopt;

        std::sort(batch.begin(), batch.end(), [](Node const& a, Node const& b) {
            if (a.problem != b.problem) return a.problem < b.problem;
            if (a.objective != b.objective) return a.objective < b.objective;
            return detail::lex_less(a.phi, b.phi);
        });
        ready_.reserve(batch.size());
        for (auto& node : batch) {
            ready_.push_back(RankedAssignment{node.problem, std::move(node.phi), node.objective,
                                              problems_[node.problem].offset + node.objective});
        }
        return std::move(ready_[ready_pos_++]);
    }

    /// Number of LAP (re)solves performed so far.
    [[nodiscard]] std::size_t solves() const { return solves_; }

private:
    // Exact-tie batches larger than this are emitted in discovery order.
    static constexpr std::size_t kMaxTieBatch = 4096;

    struct Problem {
        CostMatrix base;
        std::vector<double> square;
        std::size_t dim = 0;
        double offset = 0.0;
    };

    struct Node {
        std::size_t problem = 0;
        bool exact = false;
        double key = 0.0;        // offset + objective (exact) or a lower bound on it (pending)
        double parent_key = 0.0;
        double objective = 0.0;
        std::uint64_t seq = 0;
        std::vector<int> forced;                      // per real row, forced column or -1
        std::vector<std::pair<int, int>> forbidden;   // (row, column)
        std::shared_ptr<detail::SquareSolution const> solution;  // own (exact) or parent's (pending)
        int released_row = -1;
        Assignment phi;
    };

    // Min-heap order: key, then pending before exact, then deterministic tie keys.
    static bool after(Node const& a, Node const& b) {
        if (a.key != b.key) return a.key > b.key;
        if (a.exact != b.exact) return a.exact;
        if (a.exact) {
            if (a.problem != b.problem) return a.problem > b.problem;
            if (a.objective != b.objective) return a.objective > b.objective;
            return detail::lex_less(b.phi, a.phi);
        }
        return a.seq > b.seq;
    }

    void push(Node node) {
        node.seq = seq_++;
        heap_.push_back(std::move(node));
        std::push_heap(heap_.begin(), heap_.end(), after);
    }

    Node pop() {
        std::pop_heap(heap_.begin(), heap_.end(), after);
        Node node = std::move(heap_.back());
        heap_.pop_back();
        return node;
    }

    std::vector<double> constrained_matrix(Node const& node) const {
        auto const& prob = problems_[node.problem];
        auto const dim = prob.dim;
        std::vector<double> m = prob.square;
        for (auto [r, c] : node.forbidden) {
            m[static_cast<std::size_t>(r) * dim + static_cast<std::size_t>(c)] = kInf;
        }
        for (std::size_t r = 0; r < node.forced.size(); ++r) {
            if (node.forced[r] < 0) continue;
            double keep = m[r * dim + static_cast<std::size_t>(node.forced[r])];
            std::fill(m.begin() + static_cast<std::ptrdiff_t>(r * dim),
                      m.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim), kInf);
            m[r * dim + static_cast<std::size_t>(node.forced[r])] = keep;
        }
        return m;
    }

    void finish_exact(Node& node, std::shared_ptr<detail::SquareSolution const> sol) {
        auto const& prob = problems_[node.problem];
        auto const n = prob.base.tracks();
        node.phi.assign(n, kGated);
        for (std::size_t i = 0; i < n; ++i) {
            node.phi[i] = prob.base.phi_for(static_cast<std::size_t>(sol->col4row[i]));
        }
        node.objective = prob.base.objective(node.phi);
        node.key = std::max(prob.offset + node.objective, node.parent_key);
        node.exact = true;
        node.solution = std::move(sol);
        node.released_row = -1;
    }

    void push_root(std::size_t p) {
        auto const& prob = problems_[p];
        ++solves_;
        auto sol = detail::solve_square(prob.square.data(), prob.dim, ws_);
        if (!sol) return;
        Node root;
        root.problem = p;
        root.forced.assign(prob.base.tracks(), -1);
        root.parent_key = -kInf;
        finish_exact(root, std::make_shared<detail::SquareSolution const>(std::move(*sol)));
        push(std::move(root));
    }

    void resolve(Node node) {
        auto const& prob = problems_[node.problem];
        auto const dim = prob.dim;
        auto const matrix = constrained_matrix(node);
        detail::SquareSolution s = *node.solution;
        auto const r = static_cast<std::size_t>(node.released_row);
        auto const c = s.col4row[r];
        s.row4col[static_cast<std::size_t>(c)] = -1;
        s.col4row[r] = -1;
        ++solves_;
        if (!detail::augment_row(matrix.data(), dim, s, r, ws_)) return;
        finish_exact(node, std::make_shared<detail::SquareSolution const>(std::move(s)));
        push(std::move(node));
    }

    // Murty partition of an exact node's remaining space. Children are pushed
    // with a reduced-cost lower bound and only solved when they reach the top.
    void split(Node const& node) {
        auto const& prob = problems_[node.problem];
        auto const dim = prob.dim;
        auto const n = prob.base.tracks();
        auto const& sol = *node.solution;
        std::vector<int> forced = node.forced;
        for (std::size_t r = 0; r < n; ++r) {
            if (node.forced[r] >= 0) continue;
            auto const c = sol.col4row[r];
            double best = kInf;
            double const* row = prob.square.data() + r * dim;
            for (std::size_t j = 0; j < dim; ++j) {
                if (static_cast<int>(j) == c || std::isinf(row[j])) continue;
                bool banned = false;
                for (auto [fr, fc] : node.forbidden) {
                    if (fr == static_cast<int>(r) && fc == static_cast<int>(j)) {
                        banned = true;
                        break;
                    }
                }
                if (banned) continue;
                best = std::min(best, row[j] - sol.u[r] - sol.v[j]);
            }
            if (best < kInf) {
                Node child;
                child.problem = node.problem;
                child.exact = false;
                child.parent_key = node.key;
                child.key = node.key + std::max(0.0, best);
                child.forced = forced;
                child.forbidden = node.forbidden;
                child.forbidden.emplace_back(static_cast<int>(r), c);
                child.solution = node.solution;
                child.released_row = static_cast<int>(r);
                push(std::move(child));
            }
            forced[r] = c;
        }
    }

    std::vector<Problem> problems_;
    std::vector<Node> heap_;
    std::vector<RankedAssignment> ready_;
    std::size_t ready_pos_ = 0;
    std::uint64_t seq_ = 0;
    std::size_t solves_ = 0;
    detail::LapWorkspace ws_;
};

/// Minimum-cost assignment: every track takes exactly one column (a detection
/// or its own gate), every detection is used at most once.
inline LapResult solve_lap(CostMatrix const& c) {
    auto const dim = c.columns();
    auto const sq = detail::square_embedding(c);
    detail::LapWorkspace ws;
    auto sol = detail::solve_square(sq.data(), dim, ws);
    if (!sol) throw Infeasible("solve_lap: no feasible assignment");
    LapResult out;
    out.assignment.assign(c.tracks(), kGated);
    for (std::size_t i = 0; i < c.tracks(); ++i) {
        out.assignment[i] = c.phi_for(static_cast<std::size_t>(sol->col4row[i]));
    }
    out.objective = c.objective(out.assignment);
    return out;
}

/// The min(K, #feasible) cheapest assignments in nondecreasing objective order.
inline RankedAssignments murty_k_best(CostMatrix const& c, std::size_t k) {
    if (k < 1) throw InvalidConfig("murty_k_best: K must be >= 1");
    RankedAssignmentStream stream(c);
    RankedAssignments out;
    while (out.size() < k) {
        auto next = stream.next();
        if (!next) break;
        out.push_back(std::move(*next));
    }
    return out;
}

struct ParentProblem {
    CostMatrix costs;
    double parent_cost = 0.0;
};

/// The K globally cheapest (parent_cost + objective) assignments across all
/// parents' subproblems, from one shared Murty queue.
inline RankedAssignments k_best_of_k(std::vector<ParentProblem> const& parents, std::size_t k) {
    if (k < 1) throw InvalidConfig("k_best_of_k: K must be >= 1");
    if (parents.empty()) throw InvalidConfig("k_best_of_k: at least one parent required");
    std::vector<CostMatrix> problems;
    std::vector<double> offsets;
    problems.reserve(parents.size());
    for (auto const& p : parents) {
        problems.push_back(p.costs);
        offsets.push_back(p.parent_cost);
    }
    RankedAssignmentStream stream(std::move(problems), std::move(offsets));
    RankedAssignments out;
    while (out.size() < k) {
        auto next = stream.next();
        if (!next) break;
        out.push_back(std::move(*next));
    }
    return out;
}

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

}  // namespace mhht
