#include "mhht/core.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace mhht;

TEST(CanonicalGraph, SmallestLadderHasSixEdges) {
    auto g = build_canonical_embryo_graph(2);
    EXPECT_EQ(g.vertex_count(), 4u);
    EXPECT_EQ(g.edge_count(), 6u);
    ASSERT_EQ(g.body_segments().size(), 1u);
    EXPECT_EQ(g.body_segments()[0], (BodySegment{0, 1, 3, 2}));
}

TEST(CanonicalGraph, TenPairsGivesTwentySeamCells) {
    auto g = build_canonical_embryo_graph(10);
    EXPECT_EQ(g.vertex_count(), 20u);
    EXPECT_EQ(g.labels().front(), "H0L");
    EXPECT_EQ(g.labels()[1], "H0R");
    EXPECT_EQ(g.labels().back(), "TR");
    // 10 lateral + 9 * (2 longitudinal + 2 diagonal)
    EXPECT_EQ(g.edge_count(), 46u);
    EXPECT_EQ(g.body_segments().size(), 9u);
}

TEST(CanonicalGraph, ConnectedAndDeterministic) {
    for (std::size_t p = 2; p <= 12; ++p) {
        auto a = build_canonical_embryo_graph(p);
        auto b = build_canonical_embryo_graph(p);
        EXPECT_TRUE(a.is_connected());
        EXPECT_EQ(a, b);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (auto e : a.edges()) {
            EXPECT_NE(e.u, e.v);
            EXPECT_TRUE(seen.insert({std::min(e.u, e.v), std::max(e.u, e.v)}).second);
        }
    }
}

TEST(CanonicalGraph, RejectsSinglePair) {
    EXPECT_THROW(build_canonical_embryo_graph(1), InvalidConfig);
    EXPECT_THROW(build_canonical_embryo_graph(0), InvalidConfig);
}

TEST(EmbryoGraph, RejectsSelfLoopsDuplicatesAndRange) {
    EXPECT_THROW(EmbryoGraph({"a", "b"}, {{0, 0}}), InvalidConfig);
    EXPECT_THROW(EmbryoGraph({"a", "b"}, {{0, 1}, {1, 0}}), InvalidConfig);
    EXPECT_THROW(EmbryoGraph({"a", "b"}, {{0, 2}}), InvalidConfig);
    EmbryoGraph g({"a", "b", "c"}, {{0, 1}});
    EXPECT_FALSE(g.is_connected());
    EXPECT_EQ(g.neighbours(1), std::vector<std::size_t>{0});
}

TEST(GateConfig, RequiresPositiveFiniteRadii) {
    EXPECT_THROW(GateConfig::uniform(0.0), InvalidConfig);
    EXPECT_THROW(GateConfig::uniform(-1.0), InvalidConfig);
    EXPECT_THROW(GateConfig::per_object({1.0, std::numeric_limits<double>::infinity()}), InvalidConfig);
    auto g = GateConfig::per_object({1.0, 2.0});
    EXPECT_DOUBLE_EQ(g.radius(1), 2.0);
    EXPECT_THROW(g.validate(3), DimensionMismatch);
    EXPECT_DOUBLE_EQ(GateConfig::uniform(7.5).radius(42), 7.5);
}

TEST(DetectionSet, RejectsDuplicatesAndNonFinite) {
    DetectionSet ok(0, {Vec3(0, 0, 0), Vec3(1, 0, 0)});
    EXPECT_NO_THROW(ok.validate());
    DetectionSet dup(0, {Vec3(1, 2, 3), Vec3(1, 2, 3)});
    EXPECT_THROW(dup.validate(), InvalidConfig);
    DetectionSet nan(0, {Vec3(std::nan(""), 0, 0)});
    EXPECT_THROW(nan.validate(), InvalidConfig);
    EXPECT_NO_THROW(DetectionSet(3, {}).validate());
}

TEST(TrackState, ValidatesSizeAndFiniteness) {
    TrackState s(0, {Vec3(0, 0, 0), Vec3(1, 1, 1)});
    EXPECT_NO_THROW(s.validate(2));
    EXPECT_THROW(s.validate(3), DimensionMismatch);
    s.positions[0].x() = std::numeric_limits<double>::infinity();
    EXPECT_THROW(s.validate(2), InvalidConfig);
}

TEST(Assignment, OneToOneCheck) {
    EXPECT_NO_THROW(assert_one_to_one({0, 1, 0, 2}, 2));
    EXPECT_THROW(assert_one_to_one({1, 1}, 2), Infeasible);
    EXPECT_THROW(assert_one_to_one({3}, 2), Infeasible);
}

TEST(Hypothesis, PartitionsDetectedAndUndetected) {
    Hypothesis h;
    h.assignment = {0, 2, 1, 0};
    EXPECT_EQ(h.detected(), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(h.undetected(), (std::vector<std::size_t>{0, 3}));
}
