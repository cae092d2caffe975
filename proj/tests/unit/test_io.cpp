#include "mhht/io.hpp"
#include "mhht/search.hpp"
#include "mhht/simulator.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mhht;
namespace fs = std::filesystem;

namespace {

SimConfig noisy_config(std::uint64_t seed = 3) {
    SimConfig c;
    c.seed = seed;
    c.frame_count = 40;
    c.pair_count = 5;
    c.corruption.noise_sigma = 0.4;
    c.corruption.dropout_probability = 0.2;
    c.corruption.debris_rate = 1.0;
    return c;
}

std::string dump(SequenceArchive const& a) {
    std::ostringstream os;
    write_archive(os, a);
    return os.str();
}

SequenceArchive parse(std::string const& text) {
    std::istringstream is(text);
    return read_archive(is);
}

fs::path temp_dir() {
    auto p = fs::temp_directory_path() / ("mhht_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                          "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Archive, RoundTripIsIdentity) {
    auto c = noisy_config();
    auto sim = generate(c);
    auto a = make_archive(sim, c, true);
    auto b = parse(dump(a));
    EXPECT_EQ(b.manifest.n, a.manifest.n);
    EXPECT_EQ(b.manifest.pair_count, a.manifest.pair_count);
    EXPECT_EQ(b.manifest.frame_count, a.manifest.frame_count);
    EXPECT_EQ(b.manifest.units, "um");
    EXPECT_EQ(b.manifest.seed, a.manifest.seed);
    EXPECT_EQ(b.manifest.provenance, a.manifest.provenance);
    EXPECT_EQ(b.detections, a.detections);
    EXPECT_EQ(b.annotations, a.annotations);
    EXPECT_FALSE(b.graph.has_value());
    EXPECT_EQ(dump(b), dump(a));
}

TEST(Archive, EmptyFramesSurvive) {
    auto c = noisy_config();
    c.corruption.dropout_probability = 1.0;
    c.corruption.debris_rate = 0.0;
    auto sim = generate(c);
    auto a = make_archive(sim, c, false);
    auto b = parse(dump(a));
    ASSERT_EQ(b.detections.size(), 40u);
    for (auto const& d : b.detections) EXPECT_EQ(d.size(), 0u);
}

TEST(Archive, GraphOverrideAndLostAnnotations) {
    auto c = noisy_config();
    auto sim = generate(c);
    auto a = make_archive(sim, c, false);
    a.graph = build_canonical_embryo_graph(5);
    auto ann = sim.ground_truth[7];
    ann.status[3] = ObjectStatus::lost;
    a.annotations.emplace(7, ann);
    auto b = parse(dump(a));
    ASSERT_TRUE(b.graph.has_value());
    EXPECT_EQ(b.graph->labels(), a.graph->labels());
    EXPECT_EQ(b.graph->edges(), a.graph->edges());
    EXPECT_EQ(b.annotations.at(7), ann);
    EXPECT_FALSE(b.fully_annotated());
    EXPECT_THROW(b.annotation_sequence(), InsufficientData);
}

TEST(Archive, SameSeedSameBytes) {
    auto c = noisy_config(9);
    EXPECT_EQ(dump(make_archive(generate(c), c, true)), dump(make_archive(generate(c), c, true)));
}

TEST(Archive, ManifestCountMismatchRejected) {
    auto c = noisy_config();
    auto text = dump(make_archive(generate(c), c, false));
    // Drop the last detection record.
    text.erase(text.rfind('{'));
    EXPECT_THROW(parse(text), FormatError);
}

TEST(Archive, BadRecordsRejected) {
    auto c = noisy_config();
    auto text = dump(make_archive(generate(c), c, false));
    auto first_newline = text.find('\n');
    auto header = text.substr(0, first_newline + 1);
    auto body = text.substr(first_newline + 1);
    EXPECT_THROW(parse(body), FormatError);  // no manifest
    EXPECT_THROW(parse(header + "{\"type\":\"mystery\"}\n" + body), FormatError);
    auto second = body.substr(0, body.find('\n') + 1);
    EXPECT_THROW(parse(header + second + body), FormatError);  // duplicate frame
    EXPECT_THROW(parse(header + "not json\n" + body), FormatError);
    auto wrong_version = header;
    wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":99");
    EXPECT_THROW(parse(wrong_version + body), FormatError);
    EXPECT_THROW(parse(""), FormatError);
}

TEST(Archive, FileRoundTrip) {
    auto dir = temp_dir();
    auto c = noisy_config();
    auto a = make_archive(generate(c), c, true);
    save_archive((dir / "a.jsonl").string(), a);
    auto b = load_archive((dir / "a.jsonl").string());
    EXPECT_EQ(b.detections, a.detections);
    EXPECT_THROW(load_archive((dir / "missing.jsonl").string()), FormatError);
    fs::remove_all(dir);
}

TEST(Covariance, RoundTripPreservesScores) {
    auto c = noisy_config();
    c.frame_count = 200;
    auto sim = generate(c);
    AssociationModel model;
    model.variant = ModelVariant::pm;
    model.graph = sim.graph;
    model.posture_cov = fit_posture_covariance(sim.ground_truth, sim.graph);
    model.movement_cov = fit_movement_covariance(sim.ground_truth);

    auto dir = temp_dir();
    save_covariance((dir / "p.json").string(), *model.posture_cov);
    save_covariance((dir / "m.json").string(), *model.movement_cov);
    AssociationModel loaded = model;
    loaded.posture_cov = load_covariance((dir / "p.json").string());
    loaded.movement_cov = load_covariance((dir / "m.json").string());
    fs::remove_all(dir);

    EXPECT_EQ(loaded.posture_cov->kind, CovarianceKind::posture);
    EXPECT_EQ(loaded.movement_cov->kind, CovarianceKind::movement);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.5);
    for (int i = 0; i < 100; ++i) {
        auto const& prev = sim.ground_truth[static_cast<std::size_t>(i)];
        Hypothesis h;
        h.completed_state = sim.ground_truth[static_cast<std::size_t>(i + 1)];
        for (auto& p : h.completed_state.positions) p += Vec3(g(rng), g(rng), g(rng));
        double unary = std::abs(g(rng));
        double a = evaluate_hypothesis(model, h, prev, unary);
        double b = evaluate_hypothesis(loaded, h, prev, unary);
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST(Covariance, MalformedRejected) {
    auto m = make_covariance_model(CovarianceKind::posture, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    auto j = to_json(m);
    EXPECT_NO_THROW(covariance_from_json(j));
    auto bad = j;
    bad["dim"] = 3;
    EXPECT_THROW(covariance_from_json(bad), FormatError);
    bad = j;
    bad["format"] = "something-else";
    EXPECT_THROW(covariance_from_json(bad), FormatError);
    bad = j;
    bad["kind"] = "weird";
    EXPECT_ANY_THROW(covariance_from_json(bad));
    bad = j;
    bad.erase("precision");
    EXPECT_THROW(covariance_from_json(bad), FormatError);
}

TEST(History, RoundTripIsIdentity) {
    auto c = noisy_config();
    auto sim = generate(c);
    SearchConfig cfg;
    cfg.K = 3;
    cfg.N = 2;
    cfg.model.graph = sim.graph;
    cfg.gates = GateConfig::uniform(4.0);
    CorrectionsOracle oracle{sim.ground_truth, kDefaultPassThreshold};
    std::vector<DetectionSet> dets(sim.detections.begin() + 1, sim.detections.end());
    auto h = track_sequence(sim.ground_truth.front(), dets, cfg, &oracle);
    std::ostringstream os;
    write_history(os, h);
    std::istringstream is(os.str());
    auto back = read_history(is);
    EXPECT_EQ(back, h);
    for (std::size_t i = 0; i < h.frames.size(); ++i) {
        auto const& x = h.frames[i].diagnostics;
        auto const& y = back.frames[i].diagnostics;
        EXPECT_EQ(x.nodes_expanded, y.nodes_expanded);
        EXPECT_EQ(x.best_cost_per_depth, y.best_cost_per_depth);
        EXPECT_EQ(x.chosen_path_cost, y.chosen_path_cost);
        EXPECT_EQ(back.frames[i].chosen.unary_cost, h.frames[i].chosen.unary_cost);
        EXPECT_EQ(back.frames[i].chosen.model_cost, h.frames[i].chosen.model_cost);
    }
    std::ostringstream again;
    write_history(again, back);
    EXPECT_EQ(again.str(), os.str());
}

TEST(History, InfiniteCostsSurvive) {
    TrackHistory h;
    h.initial = TrackState(0, {Vec3(0, 0, 0)});
    FrameRecord r;
    r.frame = 1;
    r.proposed = r.committed = TrackState(1, {Vec3(1, 0, 0)});
    r.chosen.assignment = {kGated};
    r.diagnostics.best_cost_per_depth = {1.0, kInf};
    r.diagnostics.chosen_path_cost = kInf;
    h.frames.push_back(r);
    std::ostringstream os;
    write_history(os, h);
    std::istringstream is(os.str());
    auto back = read_history(is);
    EXPECT_EQ(back.frames[0].diagnostics.chosen_path_cost, kInf);
    EXPECT_EQ(back.frames[0].diagnostics.best_cost_per_depth[1], kInf);
    EXPECT_EQ(back.frames[0].chosen.assignment, (Assignment{kGated}));
}

TEST(SimConfigJson, RoundTrip) {
    auto c = noisy_config(77);
    c.motion.bend_frequency = 0.05;
    c.corruption.merge_distance = 1.25;
    auto back = sim_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(SimConfigJson, MissingKeysKeepDefaults) {
    auto c = sim_config_from_json(Json::parse(R"({"frame_count": 12, "corruption": {"debris_rate": 0.5}})"));
    SimConfig d;
    EXPECT_EQ(c.frame_count, 12u);
    EXPECT_EQ(c.corruption.debris_rate, 0.5);
    EXPECT_EQ(c.pair_count, d.pair_count);
    EXPECT_EQ(c.motion.twitch_probability, d.motion.twitch_probability);
}

TEST(SimConfigJson, Rejections) {
    EXPECT_THROW(sim_config_from_json(Json::parse(R"({"frame_cuont": 12})")), InvalidConfig);
    EXPECT_THROW(sim_config_from_json(Json::parse(R"({"motion": {"twich": 1}})")), InvalidConfig);
    EXPECT_THROW(sim_config_from_json(Json::parse(R"({"frame_count": "many"})")), InvalidConfig);
    EXPECT_THROW(sim_config_from_json(Json::parse(R"({"corruption": {"dropout_probability": 2}})")), InvalidConfig);
    EXPECT_THROW(sim_config_from_json(Json::parse("[1, 2]")), InvalidConfig);
}

TEST(SimConfigJson, Files) {
    auto dir = temp_dir();
    EXPECT_THROW(load_sim_config((dir / "nope.json").string()), FormatError);
    {
        std::ofstream out(dir / "broken.json");
        out << "{ not json";
    }
    EXPECT_THROW(load_sim_config((dir / "broken.json").string()), InvalidConfig);
    {
        std::ofstream out(dir / "ok.json");
        out << R"({"seed": 5})";
    }
    EXPECT_EQ(load_sim_config((dir / "ok.json").string()).seed, 5u);
    fs::remove_all(dir);
}
