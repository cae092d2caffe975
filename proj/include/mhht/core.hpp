#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mhht {

using Vec3 = Eigen::Vector3d;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

inline bool is_finite(Vec3 const& p) {
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// How an object's position at a frame came about.
///  - tracked:      taken from a detection or an annotation
///  - interpolated: predicted from detected graph neighbours
///  - held:         no detected neighbour, prior position carried over
///  - lost:         no usable position (annotation gaps, failed tracking)
enum class ObjectStatus : std::uint8_t { tracked, interpolated, held, lost };

inline char const* to_string(ObjectStatus s) {
    switch (s) {
    case ObjectStatus::tracked: return "tracked";
    case ObjectStatus::interpolated: return "interpolated";
    case ObjectStatus::held: return "held";
    case ObjectStatus::lost: return "lost";
    }
    return "unknown";
}

inline ObjectStatus status_from_string(std::string const& s) {
    if (s == "tracked") return ObjectStatus::tracked;
    if (s == "interpolated") return ObjectStatus::interpolated;
    if (s == "held") return ObjectStatus::held;
    if (s == "lost") return ObjectStatus::lost;
    throw InvalidConfig("unknown object status '" + s + "'");
}

/// Positions of all n tracked objects at one frame, in micrometres.
struct TrackState {
    std::size_t frame = 0;
    std::vector<Vec3> positions;
    std::vector<ObjectStatus> status;

    TrackState() = default;

    TrackState(std::size_t frame_index, std::vector<Vec3> pos)
        : frame(frame_index), positions(std::move(pos)), status(positions.size(), ObjectStatus::tracked) {}

    TrackState(std::size_t frame_index, std::vector<Vec3> pos, std::vector<ObjectStatus> st)
        : frame(frame_index), positions(std::move(pos)), status(std::move(st)) {
        if (status.size() != positions.size()) {
            throw DimensionMismatch("TrackState: status and positions differ in length");
        }
    }

    [[nodiscard]] std::size_t size() const { return positions.size(); }

    [[nodiscard]] bool is_lost(std::size_t i) const { return status[i] == ObjectStatus::lost; }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(positions.begin(), positions.end(), [](Vec3 const& p) { return is_finite(p); });
    }

    void validate(std::size_t expected_n) const {
        if (positions.size() != expected_n) {
            throw DimensionMismatch("TrackState: expected " + std::to_string(expected_n) + " objects, got " +
                                    std::to_string(positions.size()));
        }
        if (status.size() != positions.size()) {
            throw DimensionMismatch("TrackState: status and positions differ in length");
        }
        if (!all_finite()) throw InvalidConfig("TrackState: non-finite coordinate");
    }

    friend bool operator==(TrackState const& a, TrackState const& b) {
        return a.frame == b.frame && a.positions == b.positions && a.status == b.status;
    }
};

/// Unlabelled candidate points at one frame. Empty frames are legal.
struct DetectionSet {
    std::size_t frame = 0;
    std::vector<Vec3> points;

    DetectionSet() = default;
    DetectionSet(std::size_t frame_index, std::vector<Vec3> pts) : frame(frame_index), points(std::move(pts)) {}

    [[nodiscard]] std::size_t size() const { return points.size(); }

    void validate() const {
        for (auto const& p : points) {
            if (!is_finite(p)) throw InvalidConfig("DetectionSet: non-finite coordinate");
        }
        std::vector<std::array<double, 3>> sorted;
        sorted.reserve(points.size());
        for (auto const& p : points) sorted.push_back({p.x(), p.y(), p.z()});
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw InvalidConfig("DetectionSet: duplicate detection point at frame " + std::to_string(frame));
        }
    }

    friend bool operator==(DetectionSet const& a, DetectionSet const& b) {
        return a.frame == b.frame && a.points == b.points;
    }
};

struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    friend bool operator==(Edge const&, Edge const&) = default;
};

/// Quadrilateral (left_k, right_k, right_k+1, left_k+1) between sequential pairs.
using BodySegment = std::array<std::size_t, 4>;

/// Vertex/edge structure encoding which objects move together.
class EmbryoGraph {
public:
    EmbryoGraph() = default;

    EmbryoGraph(std::vector<std::string> labels, std::vector<Edge> edges, std::vector<BodySegment> segments = {})
        : labels_(std::move(labels)), edges_(std::move(edges)), segments_(std::move(segments)) {
        auto const n = labels_.size();
        std::vector<std::pair<std::size_t, std::size_t>> seen;
        seen.reserve(edges_.size());
        for (auto const& e : edges_) {
            if (e.u >= n || e.v >= n) throw InvalidConfig("EmbryoGraph: edge endpoint out of range");
            if (e.u == e.v) throw InvalidConfig("EmbryoGraph: self-loop on vertex " + std::to_string(e.u));
            seen.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
            throw InvalidConfig("EmbryoGraph: duplicate edge");
        }
        for (auto const& s : segments_) {
            for (auto idx : s) {
                if (idx >= n) throw InvalidConfig("EmbryoGraph: body segment vertex out of range");
            }
        }
        neighbours_.assign(n, {});
        for (auto const& e : edges_) {
            neighbours_[e.u].push_back(e.v);
            neighbours_[e.v].push_back(e.u);
        }
        for (auto& nb : neighbours_) std::sort(nb.begin(), nb.end());
    }

    [[nodiscard]] std::size_t vertex_count() const { return labels_.size(); }
    [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
    [[nodiscard]] std::vector<std::string> const& labels() const { return labels_; }
    [[nodiscard]] std::vector<Edge> const& edges() const { return edges_; }
    [[nodiscard]] std::vector<BodySegment> const& body_segments() const { return segments_; }
    [[nodiscard]] std::vector<std::size_t> const& neighbours(std::size_t v) const { return neighbours_[v]; }

    [[nodiscard]] bool is_connected() const {
        auto const n = vertex_count();
        if (n == 0) return true;
        std::vector<bool> seen(n, false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t count = 1;
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            for (auto w : neighbours_[v]) {
                if (!seen[w]) {
                    seen[w] = true;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == n;
    }

    friend bool operator==(EmbryoGraph const& a, EmbryoGraph const& b) {
        return a.labels_ == b.labels_ && a.edges_ == b.edges_ && a.segments_ == b.segments_;
    }

private:
    std::vector<std::string> labels_;
    std::vector<Edge> edges_;
    std::vector<BodySegment> segments_;
    std::vector<std::vector<std::size_t>> neighbours_;
};

inline std::size_t left_index(std::size_t pair) { return 2 * pair; }
inline std::size_t right_index(std::size_t pair) { return 2 * pair + 1; }

/// Seam-cell style ladder graph over 2 * pair_count vertices, pairs ordered
/// anterior to posterior and interleaved (left, right). Each pair carries a
/// lateral edge; sequential pairs are joined by both longitudinal edges and
/// both diagonals.
inline EmbryoGraph build_canonical_embryo_graph(std::size_t pair_count) {
    if (pair_count < 2) throw InvalidConfig("build_canonical_embryo_graph: pair_count must be >= 2");

    static constexpr std::array<char const*, 10> kSeamNames = {"H0", "H1", "H2", "V1", "V2",
                                                               "V3", "V4", "V5", "V6", "T"};
    std::vector<std::string> labels;
    labels.reserve(2 * pair_count);
    for (std::size_t k = 0; k < pair_count; ++k) {
        std::string base = pair_count == kSeamNames.size() ? kSeamNames[k] : "P" + std::to_string(k);
        labels.push_back(base + "L");
        labels.push_back(base + "R");
    }

    std::vector<Edge> edges;
    std::vector<BodySegment> segments;
    for (std::size_t k = 0; k < pair_count; ++k) {
        edges.push_back({left_index(k), right_index(k)});
        if (k + 1 < pair_count) {
            edges.push_back({left_index(k), left_index(k + 1)});
            edges.push_back({right_index(k), right_index(k + 1)});
            edges.push_back({left_index(k), right_index(k + 1)});
            edges.push_back({right_index(k), left_index(k + 1)});
            segments.push_back({left_index(k), right_index(k), right_index(k + 1), left_index(k + 1)});
        }
    }
    return EmbryoGraph(std::move(labels), std::move(edges), std::move(segments));
}

/// Gate radii d_i: one uniform value or one per object.
class GateConfig {
public:
    GateConfig() = default;

    static GateConfig uniform(double radius) { return GateConfig(std::vector<double>{radius}); }
    static GateConfig per_object(std::vector<double> radii) { return GateConfig(std::move(radii)); }

    [[nodiscard]] double radius(std::size_t object) const {
        if (radii_.empty()) throw InvalidConfig("GateConfig: no gate configured");
        return radii_.size() == 1 ? radii_.front() : radii_.at(object);
    }

    [[nodiscard]] bool is_uniform() const { return radii_.size() == 1; }
    [[nodiscard]] std::vector<double> const& radii() const { return radii_; }

    void validate(std::size_t n) const {
        if (radii_.empty()) throw InvalidConfig("GateConfig: no gate configured");
        if (radii_.size() != 1 && radii_.size() != n) {
            throw DimensionMismatch("GateConfig: expected 1 or " + std::to_string(n) + " gate radii");
        }
    }

private:
    explicit GateConfig(std::vector<double> radii) : radii_(std::move(radii)) {
        if (radii_.empty()) throw InvalidConfig("GateConfig: no gate radii");
        for (double d : radii_) {
            if (!(d > 0.0) || !std::isfinite(d)) throw InvalidConfig("GateConfig: gate radii must be finite and > 0");
        }
    }

    std::vector<double> radii_;
};

/// phi_i in {0, 1, ..., m}: 0 means the track is gated, j >= 1 is detection j-1.
using Assignment = std::vector<std::size_t>;
inline constexpr std::size_t kGated = 0;

/// Throws unless every detection index appears at most once and lies in range.
inline void assert_one_to_one(Assignment const& phi, std::size_t detection_count) {
    std::vector<bool> used(detection_count, false);
    for (auto j : phi) {
        if (j == kGated) continue;
        if (j > detection_count) throw Infeasible("assignment references detection beyond m(t)");
        if (used[j - 1]) throw Infeasible("assignment uses detection " + std::to_string(j) + " twice");
        used[j - 1] = true;
    }
}

/// One gated track-to-detection assignment plus its completed state update.
struct Hypothesis {
    Assignment assignment;
    TrackState completed_state;
    double unary_cost = 0.0;
    double model_cost = 0.0;
    double cumulative_cost = 0.0;

    [[nodiscard]] std::vector<std::size_t> detected() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] != kGated) out.push_back(i);
        }
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> undetected() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == kGated) out.push_back(i);
        }
        return out;
    }
};

}  // namespace mhht
