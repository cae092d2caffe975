#pragma once

#include "mhht/association.hpp"
#include "mhht/evaluation.hpp"
#include "mhht/search.hpp"
#include "mhht/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mhht {

/// How a benchmark embryo is made and how its models are trained: the test
/// sequence uses `seed`, the training sequence `seed + train_seed_offset`, and
/// the training annotations are its ground truth plus isotropic click noise
/// drawn from `seed + annotation_seed_offset`.
struct BenchmarkProtocol {
    SimConfig sim;
    std::uint64_t train_seed_offset = 1000;
    std::uint64_t annotation_seed_offset = 5000;
    double annotation_noise = 0.0;  ///< um
    double unary_weight = 1.0;
    double pass_threshold = kDefaultPassThreshold;
};

/// Perfect-ish detection regime: light dropout and debris, localisation noise.
inline BenchmarkProtocol standard_protocol() {
    BenchmarkProtocol p;
    p.sim.frame_count = 2000;
    p.sim.corruption.noise_sigma = 1.0;
    p.sim.corruption.dropout_probability = 0.03;
    p.sim.corruption.debris_rate = 0.5;
    p.annotation_noise = p.sim.corruption.noise_sigma;
    return p;
}

/// Heavy corruption: frequent dropout and debris.
inline BenchmarkProtocol heavy_protocol() {
    BenchmarkProtocol p;
    p.sim.frame_count = 2000;
    p.sim.corruption.noise_sigma = 0.5;
    p.sim.corruption.dropout_probability = 0.1;
    p.sim.corruption.debris_rate = 2.0;
    p.annotation_noise = p.sim.corruption.noise_sigma;
    return p;
}

struct BenchCell {
    std::string model = "gnn";  ///< gnn or an association model name
    std::size_t K = 1;
    std::size_t N = 1;
    double gate = 10.0;
    SearchRegime regime = SearchRegime::kbest_of_k;
    std::uint64_t seed = 1;
};

/// Positions with independent N(0, sigma^2) noise per axis.
inline std::vector<TrackState> annotate(std::vector<TrackState> const& truth, double sigma, std::uint64_t seed) {
    std::vector<TrackState> out = truth;
    if (sigma <= 0.0) return out;
    SimRng rng(seed);
    for (auto& s : out) {
        for (auto& p : s.positions) p += sigma * rng.normal3();
    }
    return out;
}

/// Everything a cell needs that depends only on the seed.
struct BenchData {
    SimOutput test;
    CovarianceModel posture;
    CovarianceModel movement;
    MovementQuantiles quantiles;
};

inline BenchData prepare_bench_data(BenchmarkProtocol const& protocol, std::uint64_t seed) {
    SimConfig test_cfg = protocol.sim;
    test_cfg.seed = seed;
    SimConfig train_cfg = protocol.sim;
    train_cfg.seed = seed + protocol.train_seed_offset;
    BenchData d;
    d.test = generate(test_cfg);
    auto train = generate(train_cfg);
    auto labels = annotate(train.ground_truth, protocol.annotation_noise, seed + protocol.annotation_seed_offset);
    d.posture = fit_posture_covariance(labels, train.graph);
    d.movement = fit_movement_covariance(labels);
    d.quantiles = movement_quantiles(d.test.ground_truth);
    return d;
}

/// "gnn" is the unary model with K = N = 1.
inline SearchConfig bench_search_config(BenchCell const& cell, BenchmarkProtocol const& protocol, BenchData const& data) {
    SearchConfig cfg;
    cfg.K = cell.K;
    cfg.N = cell.N;
    cfg.regime = cell.regime;
    cfg.gates = GateConfig::uniform(cell.gate);
    cfg.model.graph = data.test.graph;
    cfg.model.unary_weight = protocol.unary_weight;
    select_model(cfg, cell.model);
    if (cfg.model.needs_posture()) cfg.model.posture_cov = data.posture;
    if (cfg.model.needs_movement()) cfg.model.movement_cov = data.movement;
    return cfg;
}

/// Tracks frames 1.. from the true frame-0 state with ground-truth corrections
/// and scores the proposals by movement stratum.
inline EvalRow run_cell(BenchCell const& cell, BenchmarkProtocol const& protocol, BenchData const& data) {
    auto cfg = bench_search_config(cell, protocol, data);
    auto const& gt = data.test.ground_truth;
    std::vector<DetectionSet> dets(data.test.detections.begin() + 1, data.test.detections.end());
    CorrectionsOracle oracle{gt, protocol.pass_threshold};
    auto history = track_sequence(gt.front(), dets, cfg, &oracle);
    EvalRow row;
    row.model = cell.model;
    row.K = cfg.K;
    row.N = cfg.N;
    row.gate = cell.gate;
    row.regime = to_string(cell.regime);
    row.seed = cell.seed;
    row.report = score_run(history, gt, &data.quantiles, protocol.pass_threshold);
    return row;
}

/// MHHT_WORKERS if set to a positive integer, else the hardware thread count.
inline std::size_t worker_count() {
    if (char const* env = std::getenv("MHHT_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Called from the worker that finished cell `index`.
using CellCallback = std::function<void(std::size_t index, EvalRow const& row)>;

/// Runs every cell, `workers` at a time; rows come back in cell order.
inline std::vector<EvalRow> run_grid(std::vector<BenchCell> const& cells, BenchmarkProtocol const& protocol,
                                     std::size_t workers = worker_count(), CellCallback const& on_cell = {}) {
    std::map<std::uint64_t, BenchData> data;
    for (auto const& c : cells) {
        if (!data.count(c.seed)) data.emplace(c.seed, prepare_bench_data(protocol, c.seed));
    }
    std::vector<EvalRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                rows[i] = run_cell(cells[i], protocol, data.at(cells[i].seed));
                if (on_cell) on_cell(i, rows[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, cells.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

/// One line per cell: overall rate plus the four movement quartiles.
inline void write_grid_csv_header(std::ostream& os) {
    os << "model,K,N,gate,regime,seed,frames,errors,error_rate,q1,q2,q3,q4\n";
}

inline void write_grid_csv_row(std::ostream& os, EvalRow const& row) {
    os << row.model << ',' << row.K << ',' << row.N << ',' << row.gate << ',' << row.regime << ',' << row.seed << ','
       << row.report.frame_count << ',' << row.report.error_count << ',' << std::fixed << std::setprecision(4)
       << row.report.error_rate;
    for (int q = 1; q <= 4; ++q) {
        auto s = row.report.stratum("Q" + std::to_string(q));
        os << ',' << (s ? s->rate : 0.0);
    }
    os << std::defaultfloat << '\n';
}

}  // namespace mhht
