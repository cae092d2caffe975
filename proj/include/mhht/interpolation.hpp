#pragma once

#include "mhht/association.hpp"
#include "mhht/core.hpp"

#include <cmath>

namespace mhht {

/// State update for one hypothesis. Detected objects take their detection;
/// an undetected object u is placed at the mean of its detected neighbours'
/// new positions minus their previous offsets from u, or stays put when no
/// neighbour was detected. Interpolation is a single pass over detected
/// neighbours only.
inline TrackState complete_state(TrackState const& prev, Assignment const& phi, DetectionSet const& detections,
                                 EmbryoGraph const& graph) {
    auto const n = prev.size();
    if (phi.size() != n || graph.vertex_count() != n) {
        throw DimensionMismatch("complete_state: assignment, state and graph sizes differ");
    }
    TrackState out(detections.frame, prev.positions, std::vector<ObjectStatus>(n, ObjectStatus::tracked));
    for (std::size_t i = 0; i < n; ++i) {
        if (phi[i] == kGated) continue;
        if (phi[i] > detections.size()) throw Infeasible("complete_state: detection index out of range");
        out.positions[i] = detections.points[phi[i] - 1];
    }
    for (std::size_t u = 0; u < n; ++u) {
        if (phi[u] != kGated) continue;
        Vec3 sum = Vec3::Zero();
        std::size_t count = 0;
        for (auto v : graph.neighbours(u)) {
            if (phi[v] == kGated) continue;
            sum += out.positions[v] - (prev.positions[v] - prev.positions[u]);
            ++count;
        }
        if (count > 0) {
            out.positions[u] = sum / static_cast<double>(count);
            out.status[u] = ObjectStatus::interpolated;
        } else {
            out.positions[u] = prev.positions[u];
            out.status[u] = ObjectStatus::held;
        }
    }
    return out;
}

/// Edge-length distortion on edges touching objects that were not detected
/// (interpolated or held) in `completed`.
inline double interpolation_residual(TrackState const& completed, TrackState const& prev, EmbryoGraph const& graph) {
    if (completed.size() != prev.size() || completed.size() != graph.vertex_count()) {
        throw DimensionMismatch("interpolation_residual: shape mismatch");
    }
    auto undetected = [&](std::size_t i) {
        return completed.status[i] == ObjectStatus::interpolated || completed.status[i] == ObjectStatus::held;
    };
    double sq = 0.0;
    for (auto const& e : graph.edges()) {
        if (!undetected(e.u) && !undetected(e.v)) continue;
        double now = (completed.positions[e.u] - completed.positions[e.v]).norm();
        double before = (prev.positions[e.u] - prev.positions[e.v]).norm();
        sq += (now - before) * (now - before);
    }
    return std::sqrt(sq);
}

}  // namespace mhht
