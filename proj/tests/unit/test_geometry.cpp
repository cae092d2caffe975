#include "mhht/geometry.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mhht;

TEST(RayTriangle, AxisAlignedCentreHit) {
    auto hit = ray_triangle(Vec3(0, 0, -1), Vec3(0, 0, 1), Vec3(0, -1, 0), Vec3(1, 1, 0), Vec3(-1, 1, 0));
    ASSERT_TRUE(hit.has_value());
    EXPECT_NEAR(hit->t, 1.0, 1e-15);
    EXPECT_GE(hit->u, 0.0);
    EXPECT_GE(hit->v, 0.0);
    EXPECT_LE(hit->u + hit->v, 1.0);
}

TEST(RayTriangle, ParallelRayInPlaneMisses) {
    EXPECT_FALSE(ray_triangle(Vec3(-5, 0, 0), Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(1, 1, 0), Vec3(-1, 1, 0)));
}

TEST(RayTriangle, OutsideBarycentricRangeMisses) {
    EXPECT_FALSE(ray_triangle(Vec3(5, 5, -1), Vec3(0, 0, 1), Vec3(0, -1, 0), Vec3(1, 1, 0), Vec3(-1, 1, 0)));
}

TEST(SegmentTriangle, ClippedToEdgeExtent) {
    Vec3 a(0, -1, 0), b(1, 1, 0), c(-1, 1, 0);
    EXPECT_TRUE(segment_hits_triangle(Vec3(0, 0, -1), Vec3(0, 0, 1), a, b, c));
    EXPECT_FALSE(segment_hits_triangle(Vec3(0, 0, -2), Vec3(0, 0, -1), a, b, c));
    EXPECT_FALSE(segment_hits_triangle(Vec3(0, 0, 1), Vec3(0, 0, 2), a, b, c));
}

TEST(SegmentTriangle, DegenerateTriangleSkipped) {
    Vec3 a(0, 0, 0), b(1, 0, 0), c(2, 0, 0);
    EXPECT_FALSE(segment_hits_triangle(Vec3(1, 0, -1), Vec3(1, 0, 1), a, b, c));
}

TEST(SegmentsIntersect, StraightLadderIsClean) {
    auto g = build_canonical_embryo_graph(6);
    std::vector<Vec3> p;
    for (int k = 0; k < 6; ++k) {
        p.emplace_back(0, 10.0 * k, 0);
        p.emplace_back(5, 10.0 * k, 0);
    }
    EXPECT_FALSE(segments_intersect(TrackState(0, p), g));
}

TEST(SegmentsIntersect, FoldedLadderDetected) {
    // Segment 2 (pairs 2-3) is folded back through the plane of segment 0.
    auto g = build_canonical_embryo_graph(4);
    std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(10, 0, 0),   Vec3(0, 10, 0),  Vec3(10, 10, 0),
                        Vec3(3, 5, -5), Vec3(7, 5, -5), Vec3(3, 5, 5),   Vec3(7, 5, 5)};
    EXPECT_TRUE(segments_intersect(TrackState(0, p), g));
}

TEST(SegmentsIntersect, AdjacentSegmentsIgnored) {
    // A sharp fold between adjacent segments shares vertices but is not tested.
    auto g = build_canonical_embryo_graph(3);
    std::vector<Vec3> p{Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(0, 10, 0), Vec3(10, 10, 0), Vec3(0, 0, 0.1),
                        Vec3(10, 0, 0.1)};
    EXPECT_FALSE(segments_intersect(TrackState(0, p), g));
}

namespace {

double quad_distance(Quad const& a, Quad const& b) {
    static constexpr int kEdges[5][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}};
    double best = std::numeric_limits<double>::infinity();
    for (int dir = 0; dir < 2; ++dir) {
        Quad const& e = dir == 0 ? a : b;
        Quad const& t = dir == 0 ? b : a;
        for (auto const& ed : kEdges) {
            best = std::min(best, oracle::segment_triangle_distance(e[ed[0]], e[ed[1]], t[0], t[1], t[2]));
            best = std::min(best, oracle::segment_triangle_distance(e[ed[0]], e[ed[1]], t[0], t[2], t[3]));
        }
    }
    return best;
}

}  // namespace

TEST(SegmentsIntersect, AgreesWithDistanceOracle) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0.0, 3.0);
    auto graph = build_canonical_embryo_graph(4);
    int hits = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Vec3> p(8);
        for (auto& x : p) x = Vec3(g(rng), g(rng), g(rng));
        TrackState s(0, p);
        auto qa = segment_quad(s, graph.body_segments()[0]);
        auto qb = segment_quad(s, graph.body_segments()[2]);
        bool expected = quad_distance(qa, qb) < 1e-6;
        EXPECT_EQ(segments_intersect(s, graph), expected) << "trial " << trial;
        hits += expected;
    }
    // both outcomes must be exercised
    EXPECT_GT(hits, 20);
    EXPECT_LT(hits, 180);
}
