#include "mhht/evaluation.hpp"
#include "mhht/search.hpp"
#include "mhht/simulator.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

using namespace mhht;

namespace {

TrackState line_state(std::size_t n, double dx = 0.0) {
    std::vector<Vec3> p;
    for (std::size_t i = 0; i < n; ++i) p.emplace_back(10.0 * static_cast<double>(i) + dx, 0.0, 0.0);
    return TrackState(0, p);
}

// Largest matching under the threshold, ties broken by least total distance.
std::size_t brute_matches(DetectionSet const& det, DetectionSet const& ann, double thr) {
    std::size_t best = 0;
    std::vector<bool> used(det.size(), false);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t count) {
        if (i == ann.size()) {
            best = std::max(best, count);
            return;
        }
        rec(i + 1, count);
        for (std::size_t j = 0; j < det.size(); ++j) {
            if (used[j] || (ann.points[i] - det.points[j]).norm() > thr) continue;
            used[j] = true;
            rec(i + 1, count + 1);
            used[j] = false;
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace

TEST(FramePasses, IdentityPasses) {
    auto s = line_state(4);
    EXPECT_TRUE(frame_passes(s, s));
}

TEST(FramePasses, ThresholdIsInclusive) {
    auto ann = line_state(3);
    auto p = ann;
    p.positions[1].y() += 7.5;
    EXPECT_TRUE(frame_passes(p, ann));
    p.positions[1].y() += 1e-6;
    EXPECT_FALSE(frame_passes(p, ann));
}

TEST(FramePasses, DisplacedBeyondThresholdFails) {
    auto ann = line_state(3);
    auto p = ann;
    p.positions[2].z() += 7.6;
    EXPECT_FALSE(frame_passes(p, ann));
}

TEST(FramePasses, SwappedLabelsFail) {
    auto ann = line_state(3);
    auto p = ann;
    std::swap(p.positions[0], p.positions[1]);
    EXPECT_FALSE(frame_passes(p, ann));
}

TEST(FramePasses, LostPredictionFails) {
    auto ann = line_state(3);
    auto p = ann;
    p.status[1] = ObjectStatus::lost;
    EXPECT_FALSE(frame_passes(p, ann));
}

TEST(FramePasses, UnannotatedObjectSkipped) {
    auto ann = line_state(3);
    ann.status[2] = ObjectStatus::lost;
    auto p = ann;
    p.status[2] = ObjectStatus::tracked;
    p.positions[2].x() += 100.0;
    EXPECT_TRUE(frame_passes(p, ann));
}

TEST(MatchDetections, PerfectDetections) {
    DetectionSet a(0, {Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(0, 10, 0)});
    auto s = match_detections(a, a, 1.0);
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_EQ(s.f1, 1.0);
}

TEST(MatchDetections, NoDetections) {
    DetectionSet a(0, {Vec3(0, 0, 0)});
    auto s = match_detections(DetectionSet(0, {}), a, 1.0);
    EXPECT_EQ(s.precision, 0.0);
    EXPECT_EQ(s.recall, 0.0);
    EXPECT_EQ(s.f1, 0.0);
}

TEST(MatchDetections, HandMatchedExample) {
    DetectionSet ann(0, {Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(20, 0, 0)});
    DetectionSet det(0, {Vec3(0.5, 0, 0), Vec3(10, 0.5, 0)});
    auto s = match_detections(det, ann, 1.0);
    EXPECT_DOUBLE_EQ(s.precision, 1.0);
    EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.f1, 0.8);
}

TEST(MatchDetections, CardinalityBeatsCloseness) {
    // The cheapest single pair (d0, a1) blocks a two-pair matching.
    DetectionSet ann(0, {Vec3(0, 0, 0), Vec3(1, 0, 0)});
    DetectionSet det(0, {Vec3(0.9, 0, 0), Vec3(1.9, 0, 0)});
    auto s = match_detections(det, ann, 1.0);
    EXPECT_EQ(s.true_positives, 2u);
}

TEST(MatchDetections, AgreesWithBruteForce) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    std::uniform_int_distribution<int> count(0, 6);
    for (int trial = 0; trial < 300; ++trial) {
        DetectionSet a(0, {}), d(0, {});
        int na = count(rng), nd = count(rng);
        for (int i = 0; i < na; ++i) a.points.emplace_back(u(rng), u(rng), 0.0);
        for (int j = 0; j < nd; ++j) d.points.emplace_back(u(rng), u(rng), 0.0);
        auto s = match_detections(d, a, 1.5);
        ASSERT_EQ(s.true_positives, brute_matches(d, a, 1.5)) << "trial " << trial;
        auto swapped = match_detections(a, d, 1.5);
        EXPECT_DOUBLE_EQ(s.precision, swapped.recall);
        EXPECT_DOUBLE_EQ(s.recall, swapped.precision);
    }
}

TEST(MatchDetections, RejectsNonPositiveThreshold) {
    DetectionSet a(0, {Vec3(0, 0, 0)});
    EXPECT_THROW(match_detections(a, a, 0.0), InvalidConfig);
}

TEST(Quantiles, RankOrder) {
    EXPECT_EQ(quantile_labels({1, 2, 3, 4}, 4), (std::vector<int>{1, 2, 3, 4}));
    EXPECT_EQ(quantile_labels({4, 3, 2, 1}, 4), (std::vector<int>{4, 3, 2, 1}));
}

TEST(Quantiles, StaticSequenceIsAllBottom) {
    std::vector<TrackState> s(10, line_state(4));
    auto mq = movement_quantiles(s);
    for (auto q : mq.quartile) EXPECT_EQ(q, 1);
    for (double d : mq.displacement) EXPECT_EQ(d, 0.0);
}

TEST(Quantiles, MatchSortOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(1001);
    for (auto& x : v) x = u(rng);
    auto labels = quantile_labels(v, 4);
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        int expected = 1 + static_cast<int>(4 * rank / v.size());
        EXPECT_EQ(labels[order[rank]], expected);
    }
}

TEST(ScoreRun, AllPass) {
    TrackHistory h;
    std::vector<TrackState> ann;
    for (std::size_t t = 0; t < 5; ++t) {
        auto s = line_state(3);
        s.frame = t;
        ann.push_back(s);
        if (t > 0) h.frames.push_back({t, s, s, {}, {}, false});
    }
    auto r = score_run(h, ann);
    EXPECT_EQ(r.error_rate, 0.0);
    EXPECT_EQ(r.frame_count, 4u);
}

TEST(ScoreRun, FiveFailuresInHundred) {
    TrackHistory h;
    std::vector<TrackState> ann;
    for (std::size_t t = 0; t <= 100; ++t) {
        auto s = line_state(3);
        s.frame = t;
        ann.push_back(s);
        if (t == 0) continue;
        auto p = s;
        if (t % 20 == 0) p.positions[0].x() += 8.0;
        h.frames.push_back({t, p, s, {}, {}, false});
    }
    auto r = score_run(h, ann);
    EXPECT_DOUBLE_EQ(r.error_rate, 5.0);
    EXPECT_EQ(r.error_frames, (std::vector<std::size_t>{20, 40, 60, 80, 100}));
}

TEST(ScoreRun, StrataRecombineToOverall) {
    std::mt19937_64 rng(8);
    std::bernoulli_distribution fail(0.2);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        TrackHistory h;
        std::vector<TrackState> ann;
        for (std::size_t t = 0; t < 200; ++t) {
            auto s = line_state(3, g(rng));
            s.frame = t;
            ann.push_back(s);
            if (t == 0) continue;
            auto p = s;
            if (fail(rng)) p.positions[1].y() += 9.0;
            h.frames.push_back({t, p, s, {}, {}, false});
        }
        auto mq = movement_quantiles(ann);
        auto r = score_run(h, ann, &mq);
        for (char prefix : {'Q', 'D'}) {
            double weighted = 0.0;
            std::size_t frames = 0;
            for (auto const& s : r.strata) {
                if (s.name[0] != prefix) continue;
                weighted += s.rate * static_cast<double>(s.frames);
                frames += s.frames;
            }
            EXPECT_EQ(frames, r.frame_count);
            EXPECT_NEAR(weighted / static_cast<double>(frames), r.error_rate, 1e-9);
        }
    }
}

TEST(ScoreRun, LengthMismatchThrows) {
    TrackHistory h;
    auto s = line_state(3);
    s.frame = 3;
    h.frames.push_back({3, s, s, {}, {}, false});
    std::vector<TrackState> ann(2, line_state(3));
    EXPECT_THROW(score_run(h, ann), DimensionMismatch);
}

TEST(ScoreRun, MatchesTrackerErrorEvents) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig c;
        c.seed = seed;
        c.frame_count = 120;
        c.pair_count = 5;
        c.motion.twitch_probability = 0.3;
        c.motion.twitch_rotation_max = 0.8;
        c.corruption.noise_sigma = 0.5;
        c.corruption.dropout_probability = 0.1;
        c.corruption.debris_rate = 1.0;
        auto sim = generate(c);
        SearchConfig cfg;
        cfg.model.graph = sim.graph;
        cfg.gates = GateConfig::uniform(5.0);
        CorrectionsOracle oracle{sim.ground_truth, kDefaultPassThreshold};
        std::vector<DetectionSet> dets(sim.detections.begin() + 1, sim.detections.end());
        auto h = track_sequence(sim.ground_truth.front(), dets, cfg, &oracle);
        auto r = score_run(h, sim.ground_truth);
        EXPECT_EQ(r.error_frames, h.error_frames()) << "seed " << seed;
    }
}

TEST(EvalCsv, OneLinePerStratumPlusTotal) {
    EvalRow row;
    row.model = "pm";
    row.K = 5;
    row.N = 2;
    row.gate = 7.5;
    row.regime = "kbest";
    row.seed = 3;
    row.report.frame_count = 10;
    row.report.error_count = 1;
    row.report.error_rate = 10.0;
    row.report.strata.push_back({"Q1", 10, 1, 10.0});
    std::ostringstream os;
    write_eval_csv_header(os);
    write_eval_csv_rows(os, row);
    EXPECT_EQ(os.str(),
              "model,K,N,gate,regime,seed,stratum,frames,errors,rate\n"
              "pm,5,2,7.5,kbest,3,all,10,1,10.0000\n"
              "pm,5,2,7.5,kbest,3,Q1,10,1,10.0000\n");
}
