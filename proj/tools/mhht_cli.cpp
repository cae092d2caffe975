// mhht: simulate, fit, track, analyze, bench and serve from the command line.

#include "mhht/benchmark.hpp"
#include "mhht/io.hpp"
#include "mhht/plot.hpp"
#include "mhht/posture.hpp"
#include "mhht/review_server.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace mhht;
namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 unexpected failure, 2 bad input (files, config,
// data). Flag syntax errors use CLI11's own codes.
constexpr int kBadInput = 2;

std::ofstream create(fs::path const& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    return out;
}

struct TrackOptions {
    std::string archive;
    std::string model = "pm";
    std::size_t K = 25;
    std::size_t N = 2;
    double gate = 7.5;
    std::string regime = "explicit";
    std::string posture;
    std::string movement;
    double lambda = 1.0;
    bool corrections = false;
    bool no_intersection_pruning = false;
    double threshold = kDefaultPassThreshold;
    std::string history;
    std::string report;
};

void add_search_flags(CLI::App* cmd, TrackOptions& o) {
    cmd->add_option("archive", o.archive, "Sequence archive (.jsonl)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--model", o.model, "gnn, mht, embryo, posture, movement or pm")
        ->check(CLI::IsMember({"gnn", "mht", "embryo", "posture", "movement", "pm"}))
        ->capture_default_str();
    cmd->add_option("--K", o.K, "Hypotheses per expansion")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--N", o.N, "Lookahead frames")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--gate", o.gate, "Gate distance (um)")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--regime", o.regime, "explicit or kbest")
        ->check(CLI::IsMember({"explicit", "kbest"}))
        ->capture_default_str();
    cmd->add_option("--posture", o.posture, "Posture covariance model (.json)")->check(CLI::ExistingFile);
    cmd->add_option("--movement", o.movement, "Movement covariance model (.json)")->check(CLI::ExistingFile);
    cmd->add_option("--lambda", o.lambda, "Weight of the unary cost in shape models")->capture_default_str();
    cmd->add_flag("--no-intersection-pruning", o.no_intersection_pruning, "Keep self-intersecting hypotheses");
}

SearchConfig search_config(TrackOptions const& o, EmbryoGraph const& graph) {
    SearchConfig cfg;
    cfg.K = o.K;
    cfg.N = o.N;
    cfg.regime = search_regime_from_string(o.regime);
    cfg.gates = GateConfig::uniform(o.gate);
    cfg.prune_intersections = !o.no_intersection_pruning;
    cfg.model.graph = graph;
    cfg.model.unary_weight = o.lambda;
    select_model(cfg, o.model);
    if (!o.posture.empty()) cfg.model.posture_cov = load_covariance(o.posture);
    if (!o.movement.empty()) cfg.model.movement_cov = load_covariance(o.movement);
    if (cfg.model.needs_posture() && !cfg.model.posture_cov) throw InvalidConfig(o.model + " needs --posture");
    if (cfg.model.needs_movement() && !cfg.model.movement_cov) throw InvalidConfig(o.model + " needs --movement");
    cfg.validate();
    return cfg;
}

int cmd_simulate(std::string const& config, std::optional<std::uint64_t> seed, std::string const& out,
                 bool annotations) {
    auto cfg = load_sim_config(config);
    if (seed) cfg.seed = *seed;
    auto sim = generate(cfg);
    auto archive = make_archive(sim, cfg, annotations);
    auto os = create(out);
    write_archive(os, archive);
    std::cout << "wrote " << archive.manifest.frame_count << " frames of " << archive.manifest.n << " objects to "
              << out << '\n';
    return 0;
}

int cmd_fit(std::string const& archive_path, std::string const& posture, std::string const& movement) {
    auto archive = load_archive(archive_path);
    auto states = archive.annotation_sequence();
    if (states.size() < 3) throw InsufficientData("fit needs at least 3 annotated frames");
    auto graph = archive.effective_graph();
    auto p = fit_posture_covariance(states, graph);
    auto m = fit_movement_covariance(states);
    create(posture) << to_json(p).dump(1) << '\n';
    create(movement) << to_json(m).dump(1) << '\n';
    std::cout << "posture model: " << p.dim() << " edges, movement model: " << m.dim() << " coordinates\n";
    return 0;
}

int cmd_track(TrackOptions const& o) {
    auto archive = load_archive(o.archive);
    auto cfg = search_config(o, archive.effective_graph());
    std::optional<CorrectionsOracle> oracle;
    if (o.corrections) oracle = CorrectionsOracle{archive.annotation_sequence(), o.threshold};
    auto history = track_sequence(initial_state(archive), tracked_detections(archive), cfg, oracle ? &*oracle : nullptr);
    if (!o.history.empty()) {
        auto os = create(o.history);
        write_history(os, history);
    }
    std::cout << "tracked " << history.frames.size() << " frames";
    if (archive.fully_annotated()) {
        auto truth = archive.annotation_sequence();
        auto mq = movement_quantiles(truth);
        EvalRow row;
        row.model = o.model;
        row.K = cfg.K;
        row.N = cfg.N;
        row.gate = o.gate;
        row.regime = o.regime;
        row.seed = archive.manifest.seed.value_or(0);
        row.report = score_run(history, truth, &mq, o.threshold);
        std::cout << ", error rate " << std::fixed << std::setprecision(3) << row.report.error_rate << "%";
        if (auto q4 = row.report.stratum("Q4")) std::cout << " (top movement quartile " << q4->rate << "%)";
        if (!o.report.empty()) {
            auto os = create(o.report);
            write_eval_csv_header(os);
            write_eval_csv_rows(os, row);
        }
    } else if (!o.report.empty()) {
        throw InsufficientData("--report needs annotations on every frame");
    }
    std::cout << '\n';
    return 0;
}

struct AnalyzeOptions {
    std::string history;
    std::string archive;
    std::string out = "analysis";
    double dt = 1.0;
    std::size_t components = 4;
};

int cmd_analyze(AnalyzeOptions const& o) {
    auto history = load_history(o.history);
    auto states = history.committed_states();
    auto const n = states.front().size();
    EmbryoGraph graph = o.archive.empty() ? build_canonical_embryo_graph(n / 2) : load_archive(o.archive).effective_graph();
    fs::path dir(o.out);
    fs::create_directories(dir);

    std::vector<std::vector<double>> angles;
    for (auto const& s : states) angles.push_back(bend_angles(s, graph));
    {
        auto os = create(dir / "bend_angles.csv");
        os << "frame";
        for (std::size_t j = 0; j < angles.front().size(); ++j) os << ",a" << j;
        os << '\n' << std::setprecision(9);
        for (std::size_t t = 0; t < states.size(); ++t) {
            os << states[t].frame;
            for (double a : angles[t]) os << ',' << a;
            os << '\n';
        }
    }

    auto pca = eigen_embryos(angles);
    auto cumulative = pca.cumulative();
    {
        auto os = create(dir / "pca.csv");
        os << "component,variance_fraction,cumulative\n" << std::setprecision(9);
        for (std::size_t j = 0; j < pca.variance_fractions.size(); ++j) {
            os << j + 1 << ',' << pca.variance_fractions[j] << ',' << cumulative[j] << '\n';
        }
    }
    {
        auto os = create(dir / "eigen_embryos.csv");
        os << "angle";
        for (Eigen::Index c = 0; c < pca.components.cols(); ++c) os << ",pc" << c + 1;
        os << '\n' << std::setprecision(9);
        for (Eigen::Index r = 0; r < pca.components.rows(); ++r) {
            os << r;
            for (Eigen::Index c = 0; c < pca.components.cols(); ++c) os << ',' << pca.components(r, c);
            os << '\n';
        }
    }
    {
        auto os = create(dir / "diffusion.csv");
        os << "object,label,coefficient,exponent,nonlinear\n" << std::setprecision(9);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<Vec3> track;
            for (auto const& s : states) track.push_back(s.positions[i]);
            auto fit = diffusion_fit(track, o.dt);
            os << i << ',' << graph.labels()[i] << ',' << fit.coefficient << ',' << fit.exponent << ','
               << (fit.nonlinear ? 1 : 0) << '\n';
        }
    }

    LinePlot variance{"Cumulative variance explained", "components", "fraction", {}};
    Series cum{"cumulative", {}, {}};
    for (std::size_t j = 0; j < cumulative.size(); ++j) {
        cum.x.push_back(static_cast<double>(j + 1));
        cum.y.push_back(cumulative[j]);
    }
    variance.series.push_back(cum);
    {
        auto os = create(dir / "cumulative_variance.svg");
        write_svg(os, variance);
    }
    LinePlot shapes{"Eigen-embryos", "bend angle index", "loading", {}};
    auto const shown = std::min<std::size_t>(o.components, static_cast<std::size_t>(pca.components.cols()));
    for (std::size_t c = 0; c < shown; ++c) {
        Series s{"PC" + std::to_string(c + 1), {}, {}};
        for (Eigen::Index r = 0; r < pca.components.rows(); ++r) {
            s.x.push_back(static_cast<double>(r));
            s.y.push_back(pca.components(r, static_cast<Eigen::Index>(c)));
        }
        shapes.series.push_back(s);
    }
    {
        auto os = create(dir / "eigen_embryos.svg");
        write_svg(os, shapes);
    }
    std::cout << "analyzed " << states.size() << " frames; first " << shown << " components explain " << std::fixed
              << std::setprecision(1) << 100.0 * (shown ? cumulative[shown - 1] : 0.0) << "% of bend-angle variance\n";
    return 0;
}

struct BenchOptions {
    std::string preset = "heavy";
    std::vector<std::string> models{"gnn", "pm"};
    std::vector<double> gates{2.5, 5.0, 7.5, 10.0, 12.5};
    std::vector<std::size_t> Ks{25};
    std::size_t N = 2;
    std::string regime = "kbest";
    std::uint64_t first_seed = 1;
    std::size_t seeds = 5;
    std::size_t frames = 0;
    std::size_t workers = 0;
    std::string out = "grid.csv";
    std::string cells_dir;
};

int cmd_bench(BenchOptions const& o) {
    auto protocol = o.preset == "standard" ? standard_protocol() : heavy_protocol();
    if (o.frames > 0) protocol.sim.frame_count = o.frames;
    std::vector<BenchCell> cells;
    for (std::uint64_t s = o.first_seed; s < o.first_seed + o.seeds; ++s) {
        for (auto const& m : o.models) {
            for (double g : o.gates) {
                for (std::size_t k : o.Ks) {
                    if (m == "gnn" && k != o.Ks.front()) continue;  // K and N do not apply
                    cells.push_back({m, k, o.N, g, search_regime_from_string(o.regime), s});
                }
            }
        }
    }
    if (!o.cells_dir.empty()) fs::create_directories(o.cells_dir);
    auto on_cell = [&](std::size_t i, EvalRow const& row) {
        if (o.cells_dir.empty()) return;
        std::ostringstream name;
        name << "cell_" << std::setw(4) << std::setfill('0') << i << ".csv";
        auto os = create(fs::path(o.cells_dir) / name.str());
        write_eval_csv_header(os);
        write_eval_csv_rows(os, row);
    };
    auto rows = run_grid(cells, protocol, o.workers > 0 ? o.workers : worker_count(), on_cell);
    auto os = create(o.out);
    write_grid_csv_header(os);
    for (auto const& r : rows) write_grid_csv_row(os, r);
    std::cout << "wrote " << rows.size() << " cells to " << o.out << '\n';
    return 0;
}

int cmd_serve(TrackOptions const& o, std::string const& host, int port) {
    auto archive = load_archive(o.archive);
    auto cfg = search_config(o, archive.effective_graph());
    ReviewSession session(std::move(archive), cfg);
    ReviewServer server(session);
    std::cout << "serving review on http://" << host << ':' << port << std::endl;
    return server.run(host, port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple hypothesis hypergraph tracking"};
    app.require_subcommand(1);

    std::string sim_config, sim_out;
    std::optional<std::uint64_t> sim_seed;
    bool no_annotations = false;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic sequence archive");
    simulate->add_option("--config", sim_config, "Simulator config (.json)")->required();
    simulate->add_option("--seed", sim_seed, "Overrides the config's seed");
    simulate->add_option("--out", sim_out, "Archive to write")->required();
    simulate->add_flag("--no-annotations", no_annotations, "Omit ground-truth annotation records");

    std::string fit_archive, fit_posture, fit_movement;
    auto* fit = app.add_subcommand("fit", "Fit posture and movement covariances from annotations");
    fit->add_option("archive", fit_archive, "Annotated archive")->required()->check(CLI::ExistingFile);
    fit->add_option("--posture", fit_posture, "Posture model to write")->required();
    fit->add_option("--movement", fit_movement, "Movement model to write")->required();

    TrackOptions track_opts;
    auto* track = app.add_subcommand("track", "Track an archive and score it against its annotations");
    add_search_flags(track, track_opts);
    track->add_flag("--corrections", track_opts.corrections, "Reset failed frames from the annotations");
    track->add_option("--threshold", track_opts.threshold, "Pass distance (um)")->capture_default_str();
    track->add_option("--history", track_opts.history, "History to write (.jsonl)");
    track->add_option("--report", track_opts.report, "Evaluation CSV to write");

    AnalyzeOptions analyze_opts;
    auto* analyze = app.add_subcommand("analyze", "Bend angles, eigen-embryos and diffusion of a tracked history");
    analyze->add_option("history", analyze_opts.history, "History (.jsonl)")->required()->check(CLI::ExistingFile);
    analyze->add_option("--archive", analyze_opts.archive, "Archive whose graph to use")->check(CLI::ExistingFile);
    analyze->add_option("--out", analyze_opts.out, "Output directory")->capture_default_str();
    analyze->add_option("--dt", analyze_opts.dt, "Seconds per frame")->check(CLI::PositiveNumber)->capture_default_str();
    analyze->add_option("--components", analyze_opts.components, "Eigen-embryos to plot")->capture_default_str();

    BenchOptions bench_opts;
    auto* bench = app.add_subcommand("bench", "Run a benchmark grid over models, gates and seeds");
    bench->add_option("--preset", bench_opts.preset, "standard or heavy corruption")
        ->check(CLI::IsMember({"standard", "heavy"}))
        ->capture_default_str();
    bench->add_option("--models", bench_opts.models, "Models to run")
        ->check(CLI::IsMember({"gnn", "mht", "embryo", "posture", "movement", "pm"}))
        ->delimiter(',');
    bench->add_option("--gates", bench_opts.gates, "Gate distances (um)")->delimiter(',');
    bench->add_option("--K", bench_opts.Ks, "Hypotheses per expansion")->delimiter(',');
    bench->add_option("--N", bench_opts.N, "Lookahead frames")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--regime", bench_opts.regime, "explicit or kbest")
        ->check(CLI::IsMember({"explicit", "kbest"}))
        ->capture_default_str();
    bench->add_option("--first-seed", bench_opts.first_seed, "First seed")->capture_default_str();
    bench->add_option("--seeds", bench_opts.seeds, "Number of seeds")->capture_default_str();
    bench->add_option("--frames", bench_opts.frames, "Frames per sequence (default: preset)");
    bench->add_option("--workers", bench_opts.workers, "Parallel cells (default: MHHT_WORKERS or all cores)");
    bench->add_option("--out", bench_opts.out, "Grid CSV to write")->capture_default_str();
    bench->add_option("--cells-dir", bench_opts.cells_dir, "Also write each cell's stratified CSV here");

    TrackOptions serve_opts;
    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve frame-by-frame review over HTTP");
    add_search_flags(serve, serve_opts);
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return cmd_simulate(sim_config, sim_seed, sim_out, !no_annotations);
        if (*fit) return cmd_fit(fit_archive, fit_posture, fit_movement);
        if (*track) return cmd_track(track_opts);
        if (*analyze) return cmd_analyze(analyze_opts);
        if (*bench) return cmd_bench(bench_opts);
        if (*serve) return cmd_serve(serve_opts, host, port);
    } catch (Error const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (std::exception const& e) {
        std::cerr << "failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
