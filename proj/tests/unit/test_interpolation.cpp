#include "mhht/interpolation.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mhht;

TEST(CompleteState, SingleNeighbourCarriesTranslation) {
    EmbryoGraph g({"u", "v"}, {{0, 1}});
    TrackState prev(0, {Vec3(0, 0, 0), Vec3(5, 0, 0)});
    DetectionSet det(1, {Vec3(6, 2, 3)});
    auto s = complete_state(prev, {kGated, 1}, det, g);
    EXPECT_TRUE(s.positions[0].isApprox(Vec3(1, 2, 3)));
    EXPECT_EQ(s.status[0], ObjectStatus::interpolated);
    EXPECT_EQ(s.status[1], ObjectStatus::tracked);
    EXPECT_EQ(s.frame, 1u);
}

TEST(CompleteState, TwoNeighboursAverage) {
    EmbryoGraph g({"u", "a", "b"}, {{0, 1}, {0, 2}});
    TrackState prev(0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)});
    DetectionSet det(1, {Vec3(3, 0, 0), Vec3(0, 3, 0)});
    auto s = complete_state(prev, {kGated, 1, 2}, det, g);
    EXPECT_NEAR((s.positions[0] - Vec3(1, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(CompleteState, AllUndetectedHoldsPrevious) {
    auto g = build_canonical_embryo_graph(3);
    std::vector<Vec3> p;
    for (int i = 0; i < 6; ++i) p.emplace_back(i, 2 * i, -i);
    TrackState prev(4, p);
    auto s = complete_state(prev, Assignment(6, kGated), DetectionSet(5, {Vec3(9, 9, 9)}), g);
    EXPECT_EQ(s.positions, prev.positions);
    for (auto st : s.status) EXPECT_EQ(st, ObjectStatus::held);
}

TEST(CompleteState, InterpolatedNeighboursDoNotChain) {
    // path a - u - w: only a detected; w sees only u (undetected) so it is held.
    EmbryoGraph g({"a", "u", "w"}, {{0, 1}, {1, 2}});
    TrackState prev(0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
    auto s = complete_state(prev, {1, kGated, kGated}, DetectionSet(1, {Vec3(0, 5, 0)}), g);
    EXPECT_TRUE(s.positions[1].isApprox(Vec3(1, 5, 0)));
    EXPECT_EQ(s.positions[2], Vec3(2, 0, 0));
    EXPECT_EQ(s.status[2], ObjectStatus::held);
}

TEST(CompleteState, IdempotentOnItsOwnDetections) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 5);
    auto graph = build_canonical_embryo_graph(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Vec3> p, q;
        for (int i = 0; i < 8; ++i) {
            p.emplace_back(g(rng), g(rng), g(rng));
            q.emplace_back(g(rng), g(rng), g(rng));
        }
        TrackState prev(0, p);
        Assignment phi(8);
        for (std::size_t i = 0; i < 8; ++i) phi[i] = (rng() % 3 == 0) ? kGated : i + 1;
        DetectionSet det(1, q);
        auto once = complete_state(prev, phi, det, graph);
        std::vector<Vec3> again_pts;
        Assignment again_phi(8, kGated);
        for (std::size_t i = 0; i < 8; ++i) {
            if (phi[i] != kGated) {
                again_pts.push_back(once.positions[i]);
                again_phi[i] = again_pts.size();
            }
        }
        auto twice = complete_state(prev, again_phi, DetectionSet(1, again_pts), graph);
        EXPECT_EQ(once.positions, twice.positions);
    }
}

TEST(InterpolationResidual, ZeroWithoutUndetectedObjects) {
    auto g = build_canonical_embryo_graph(2);
    TrackState prev(0, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)});
    DetectionSet det(1, {Vec3(0, 0, 1), Vec3(2, 0, 0), Vec3(0, 3, 0), Vec3(1, 1, 4)});
    auto s = complete_state(prev, {1, 2, 3, 4}, det, g);
    EXPECT_DOUBLE_EQ(interpolation_residual(s, prev, g), 0.0);
}

TEST(InterpolationResidual, RigidTranslationLeavesNoResidual) {
    auto g = build_canonical_embryo_graph(3);
    std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(1, 2, 0), Vec3(0, 4, 1), Vec3(1, 4, 1)};
    TrackState prev(0, p);
    Vec3 shift(0.3, -1.2, 2.0);
    std::vector<Vec3> det;
    Assignment phi(6, kGated);
    for (std::size_t i = 0; i < 6; ++i) {
        if (i == 2) continue;
        det.push_back(p[i] + shift);
        phi[i] = det.size();
    }
    auto s = complete_state(prev, phi, DetectionSet(1, det), g);
    EXPECT_NEAR(interpolation_residual(s, prev, g), 0.0, 1e-12);
    EXPECT_NEAR((s.positions[2] - (p[2] + shift)).norm(), 0.0, 1e-12);
}

TEST(InterpolationResidual, MatchesDirectRecomputation) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0, 4);
    auto graph = build_canonical_embryo_graph(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vec3> p, det;
        for (int i = 0; i < 10; ++i) p.emplace_back(g(rng), g(rng), g(rng));
        std::size_t dropped = rng() % 10;
        Assignment phi(10, kGated);
        for (std::size_t i = 0; i < 10; ++i) {
            if (i == dropped) continue;
            det.push_back(p[i] + Vec3(g(rng), g(rng), g(rng)) * 0.2);
            phi[i] = det.size();
        }
        TrackState prev(0, p);
        auto s = complete_state(prev, phi, DetectionSet(1, det), graph);
        double sq = 0.0;
        for (auto e : graph.edges()) {
            if (e.u != dropped && e.v != dropped) continue;
            double d = (s.positions[e.u] - s.positions[e.v]).norm() - (p[e.u] - p[e.v]).norm();
            sq += d * d;
        }
        EXPECT_NEAR(interpolation_residual(s, prev, graph), std::sqrt(sq), 1e-12);
    }
}
