#pragma once

#include "mhht/core.hpp"

#include <array>
#include <optional>

namespace mhht {

struct RayHit {
    double t = 0.0;  ///< distance along the ray in units of |direction|
    double u = 0.0;  ///< barycentric weight of b
    double v = 0.0;  ///< barycentric weight of c
};

inline constexpr double kParallelEpsilon = 1e-9;

/// Moller-Trumbore ray/triangle test. Rays (nearly) parallel to the triangle
/// plane, |det| < kParallelEpsilon, report no hit. Hits behind the origin are
/// returned too (t < 0); callers clip t to their own extent.
inline std::optional<RayHit> ray_triangle(Vec3 const& origin, Vec3 const& dir, Vec3 const& a, Vec3 const& b,
                                          Vec3 const& c) {
    Vec3 const e1 = b - a;
    Vec3 const e2 = c - a;
    Vec3 const p = dir.cross(e2);
    double const det = e1.dot(p);
    if (std::abs(det) < kParallelEpsilon) return std::nullopt;
    double const inv = 1.0 / det;
    Vec3 const s = origin - a;
    double const u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    Vec3 const q = s.cross(e1);
    double const v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    return RayHit{e2.dot(q) * inv, u, v};
}

inline bool is_degenerate_triangle(Vec3 const& a, Vec3 const& b, Vec3 const& c) {
    return (b - a).cross(c - a).squaredNorm() < 1e-24;
}

/// Segment p0-p1 against triangle (a, b, c), endpoints included.
inline bool segment_hits_triangle(Vec3 const& p0, Vec3 const& p1, Vec3 const& a, Vec3 const& b, Vec3 const& c) {
    if (is_degenerate_triangle(a, b, c)) return false;
    auto hit = ray_triangle(p0, p1 - p0, a, b, c);
    return hit && hit->t >= 0.0 && hit->t <= 1.0;
}

using Quad = std::array<Vec3, 4>;

namespace detail {

inline bool boxes_overlap(Quad const& a, Quad const& b) {
    Vec3 amin = a[0], amax = a[0], bmin = b[0], bmax = b[0];
    for (int k = 1; k < 4; ++k) {
        amin = amin.cwiseMin(a[k]);
        amax = amax.cwiseMax(a[k]);
        bmin = bmin.cwiseMin(b[k]);
        bmax = bmax.cwiseMax(b[k]);
    }
    return (amin.array() <= bmax.array()).all() && (bmin.array() <= amax.array()).all();
}

// Every edge of `edges_of` (4 sides plus the split diagonal) against both
// triangles of `target`.
inline bool edges_hit_quad(Quad const& edges_of, Quad const& target) {
    static constexpr std::array<std::array<int, 2>, 5> kEdges{{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}};
    for (auto [i, j] : kEdges) {
        Vec3 const& p0 = edges_of[static_cast<std::size_t>(i)];
        Vec3 const& p1 = edges_of[static_cast<std::size_t>(j)];
        if (segment_hits_triangle(p0, p1, target[0], target[1], target[2])) return true;
        if (segment_hits_triangle(p0, p1, target[0], target[2], target[3])) return true;
    }
    return false;
}

}  // namespace detail

/// Quads (q0, q1, q2, q3) are split along the q0-q2 diagonal.
inline bool quads_intersect(Quad const& a, Quad const& b) {
    if (!detail::boxes_overlap(a, b)) return false;
    return detail::edges_hit_quad(a, b) || detail::edges_hit_quad(b, a);
}

inline Quad segment_quad(TrackState const& state, BodySegment const& seg) {
    return {state.positions[seg[0]], state.positions[seg[1]], state.positions[seg[2]], state.positions[seg[3]]};
}

/// True when any two nonadjacent body segments pass through each other.
inline bool segments_intersect(TrackState const& state, EmbryoGraph const& graph) {
    auto const& segs = graph.body_segments();
    if (state.size() != graph.vertex_count()) throw DimensionMismatch("segments_intersect: state/graph size differ");
    for (std::size_t s = 0; s < segs.size(); ++s) {
        auto const qa = segment_quad(state, segs[s]);
        for (std::size_t r = s + 2; r < segs.size(); ++r) {
            if (quads_intersect(qa, segment_quad(state, segs[r]))) return true;
        }
    }
    return false;
}

}  // namespace mhht
