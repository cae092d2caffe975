#pragma once

#include "mhht/association.hpp"
#include "mhht/core.hpp"
#include "mhht/history.hpp"
#include "mhht/simulator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mhht {

using Json = nlohmann::json;

/// Malformed or inconsistent file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

inline constexpr int kFormatVersion = 1;
inline constexpr char const* kSequenceFormat = "mhht-sequence";
inline constexpr char const* kCovarianceFormat = "mhht-covariance";
inline constexpr char const* kHistoryFormat = "mhht-history";

namespace io_detail {

// JSON has no infinities; +inf travels as null.
inline Json number(double x) { return std::isinf(x) && x > 0 ? Json(nullptr) : Json(x); }

inline double number(Json const& j) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    if (!j.is_number()) throw FormatError("expected a number, got " + j.dump());
    return j.get<double>();
}

inline Json point(Vec3 const& p) { return Json::array({p.x(), p.y(), p.z()}); }

inline Vec3 point(Json const& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("expected [x, y, z], got " + j.dump());
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json points(std::vector<Vec3> const& ps) {
    Json a = Json::array();
    for (auto const& p : ps) a.push_back(point(p));
    return a;
}

inline std::vector<Vec3> points(Json const& j) {
    if (!j.is_array()) throw FormatError("expected a point list");
    std::vector<Vec3> out;
    out.reserve(j.size());
    for (auto const& p : j) out.push_back(point(p));
    return out;
}

inline Json const& field(Json const& j, char const* key) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
    return *it;
}

inline void check_header(Json const& j, char const* format) {
    if (!j.is_object() || j.value("format", std::string()) != format) {
        throw FormatError(std::string("not a ") + format + " record");
    }
    if (j.value("version", 0) != kFormatVersion) {
        throw FormatError(std::string(format) + ": unsupported version " + j.value("version", Json()).dump());
    }
}

inline Json matrix(Eigen::MatrixXd const& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix(Json const& j, std::size_t dim) {
    if (!j.is_array() || j.size() != dim) throw FormatError("matrix row count does not match dim");
    auto const d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        auto const& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != dim) throw FormatError("matrix column count does not match dim");
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline std::vector<Json> read_lines(std::istream& in) {
    std::vector<Json> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(Json::parse(line));
        } catch (Json::parse_error const& e) {
            throw FormatError("line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

inline std::ifstream open_in(std::string const& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(std::string const& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace io_detail

// ---- track states and graphs ------------------------------------------------

inline Json to_json(TrackState const& s) {
    Json status = Json::array();
    for (auto st : s.status) status.push_back(to_string(st));
    return {{"frame", s.frame}, {"positions", io_detail::points(s.positions)}, {"status", status}};
}

inline TrackState track_state_from_json(Json const& j) {
    auto positions = io_detail::points(io_detail::field(j, "positions"));
    std::vector<ObjectStatus> status(positions.size(), ObjectStatus::tracked);
    if (auto it = j.find("status"); it != j.end()) {
        if (!it->is_array() || it->size() != positions.size()) throw FormatError("status list does not match positions");
        for (std::size_t i = 0; i < status.size(); ++i) status[i] = status_from_string((*it)[i].get<std::string>());
    }
    return TrackState(j.value("frame", std::size_t{0}), std::move(positions), std::move(status));
}

inline Json to_json(EmbryoGraph const& g) {
    Json edges = Json::array();
    for (auto const& e : g.edges()) edges.push_back({e.u, e.v});
    Json segments = Json::array();
    for (auto const& s : g.body_segments()) segments.push_back({s[0], s[1], s[2], s[3]});
    return {{"labels", g.labels()}, {"edges", edges}, {"segments", segments}};
}

inline EmbryoGraph graph_from_json(Json const& j) {
    auto labels = io_detail::field(j, "labels").get<std::vector<std::string>>();
    std::vector<Edge> edges;
    for (auto const& e : io_detail::field(j, "edges")) {
        if (!e.is_array() || e.size() != 2) throw FormatError("edge must be [u, v]");
        edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
    }
    std::vector<BodySegment> segments;
    if (auto it = j.find("segments"); it != j.end()) {
        for (auto const& s : *it) {
            if (!s.is_array() || s.size() != 4) throw FormatError("segment must list 4 vertices");
            segments.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>(),
                                s[3].get<std::size_t>()});
        }
    }
    return EmbryoGraph(std::move(labels), std::move(edges), std::move(segments));
}

// ---- sequence archive -------------------------------------------------------

struct ArchiveManifest {
    std::size_t n = 0;
    std::size_t pair_count = 0;
    std::size_t frame_count = 0;
    std::string units = "um";
    std::optional<std::uint64_t> seed;
    std::string provenance;
};

/// Detections for frames 0..T-1 plus optional annotations and graph override.
struct SequenceArchive {
    ArchiveManifest manifest;
    std::optional<EmbryoGraph> graph;
    std::vector<DetectionSet> detections;   ///< one per frame, in frame order
    std::map<std::size_t, TrackState> annotations;

    /// The override if present, else the canonical ladder for pair_count.
    [[nodiscard]] EmbryoGraph effective_graph() const {
        return graph ? *graph : build_canonical_embryo_graph(manifest.pair_count);
    }

    [[nodiscard]] bool fully_annotated() const { return annotations.size() == manifest.frame_count; }

    /// Annotations as a dense frame-indexed list; throws if any frame lacks one.
    [[nodiscard]] std::vector<TrackState> annotation_sequence() const {
        if (!fully_annotated()) throw InsufficientData("archive is not annotated on every frame");
        std::vector<TrackState> out;
        out.reserve(annotations.size());
        for (auto const& [f, s] : annotations) out.push_back(s);
        return out;
    }

    void validate() const {
        auto const& m = manifest;
        if (m.n == 0) throw FormatError("manifest: n must be > 0");
        if (detections.size() != m.frame_count) {
            throw FormatError("manifest declares " + std::to_string(m.frame_count) + " frames, payload has " +
                              std::to_string(detections.size()));
        }
        for (std::size_t t = 0; t < detections.size(); ++t) {
            if (detections[t].frame != t) throw FormatError("detection frames must be 0..T-1 in order");
            detections[t].validate();
        }
        auto const g = effective_graph();
        if (g.vertex_count() != m.n) throw FormatError("graph vertex count does not match manifest n");
        for (auto const& [f, s] : annotations) {
            if (f >= m.frame_count || s.frame != f) throw FormatError("annotation frame out of range");
            s.validate(m.n);
        }
    }
};

inline SequenceArchive make_archive(SimOutput const& sim, SimConfig const& cfg, bool with_annotations) {
    SequenceArchive a;
    a.manifest.n = sim.graph.vertex_count();
    a.manifest.pair_count = cfg.pair_count;
    a.manifest.frame_count = sim.detections.size();
    a.manifest.seed = cfg.seed;
    a.manifest.provenance = "simulated";
    a.detections = sim.detections;
    if (with_annotations) {
        for (auto const& s : sim.ground_truth) a.annotations.emplace(s.frame, s);
    }
    return a;
}

/// One JSON object per line: manifest, optional graph, then per-frame
/// detection records and annotation records.
inline void write_archive(std::ostream& os, SequenceArchive const& a) {
    a.validate();
    Json manifest = {{"format", kSequenceFormat},       {"version", kFormatVersion},
                     {"type", "manifest"},              {"n", a.manifest.n},
                     {"pair_count", a.manifest.pair_count}, {"frame_count", a.manifest.frame_count},
                     {"units", a.manifest.units},       {"provenance", a.manifest.provenance}};
    if (a.manifest.seed) manifest["seed"] = *a.manifest.seed;
    os << manifest.dump() << '\n';
    if (a.graph) {
        Json g = to_json(*a.graph);
        g["type"] = "graph";
        os << g.dump() << '\n';
    }
    for (auto const& d : a.detections) {
        os << Json{{"type", "detections"}, {"frame", d.frame}, {"points", io_detail::points(d.points)}}.dump() << '\n';
    }
    for (auto const& [f, s] : a.annotations) {
        Json j = to_json(s);
        j["type"] = "annotation";
        os << j.dump() << '\n';
    }
}

inline SequenceArchive read_archive(std::istream& in) {
    auto lines = io_detail::read_lines(in);
    if (lines.empty()) throw FormatError("empty sequence archive");
    auto const& head = lines.front();
    io_detail::check_header(head, kSequenceFormat);
    if (head.value("type", std::string()) != "manifest") throw FormatError("first record must be the manifest");
    SequenceArchive a;
    try {
        a.manifest.n = io_detail::field(head, "n").get<std::size_t>();
        a.manifest.pair_count = io_detail::field(head, "pair_count").get<std::size_t>();
        a.manifest.frame_count = io_detail::field(head, "frame_count").get<std::size_t>();
        a.manifest.units = head.value("units", std::string("um"));
        a.manifest.provenance = head.value("provenance", std::string());
        if (head.contains("seed")) a.manifest.seed = head["seed"].get<std::uint64_t>();
        std::map<std::size_t, DetectionSet> frames;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            auto const& j = lines[i];
            auto type = j.value("type", std::string());
            if (type == "graph") {
                a.graph = graph_from_json(j);
            } else if (type == "detections") {
                auto f = io_detail::field(j, "frame").get<std::size_t>();
                if (!frames.emplace(f, DetectionSet(f, io_detail::points(io_detail::field(j, "points")))).second) {
                    throw FormatError("duplicate detection record for frame " + std::to_string(f));
                }
            } else if (type == "annotation") {
                auto s = track_state_from_json(j);
                if (!a.annotations.emplace(s.frame, s).second) {
                    throw FormatError("duplicate annotation for frame " + std::to_string(s.frame));
                }
            } else {
                throw FormatError("unknown record type '" + type + "'");
            }
        }
        for (auto& [f, d] : frames) a.detections.push_back(std::move(d));
    } catch (Json::exception const& e) {
        throw FormatError(std::string("sequence archive: ") + e.what());
    }
    a.validate();
    return a;
}

inline void save_archive(std::string const& path, SequenceArchive const& a) {
    auto out = io_detail::open_out(path);
    write_archive(out, a);
}

inline SequenceArchive load_archive(std::string const& path) {
    auto in = io_detail::open_in(path);
    return read_archive(in);
}

// ---- covariance models ------------------------------------------------------

inline Json to_json(CovarianceModel const& m) {
    Json mean = Json::array();
    for (Eigen::Index i = 0; i < m.mean_diff.size(); ++i) mean.push_back(m.mean_diff(i));
    return {{"format", kCovarianceFormat},
            {"version", kFormatVersion},
            {"kind", to_string(m.kind)},
            {"dim", m.dim()},
            {"epsilon", m.epsilon},
            {"mean_diff", mean},
            {"covariance", io_detail::matrix(m.covariance)},
            {"precision", io_detail::matrix(m.precision)}};
}

/// The stored precision is used as is, so a loaded model scores exactly as the
/// one that was saved.
inline CovarianceModel covariance_from_json(Json const& j) {
    io_detail::check_header(j, kCovarianceFormat);
    try {
        CovarianceModel m;
        m.kind = covariance_kind_from_string(io_detail::field(j, "kind").get<std::string>());
        auto dim = io_detail::field(j, "dim").get<std::size_t>();
        m.epsilon = io_detail::field(j, "epsilon").get<double>();
        auto mean = io_detail::field(j, "mean_diff").get<std::vector<double>>();
        if (mean.size() != dim) throw FormatError("mean_diff length does not match dim");
        m.mean_diff = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(dim));
        m.covariance = io_detail::matrix(io_detail::field(j, "covariance"), dim);
        m.precision = io_detail::matrix(io_detail::field(j, "precision"), dim);
        if (!m.covariance.allFinite() || !m.precision.allFinite()) throw FormatError("non-finite matrix entry");
        return m;
    } catch (Json::exception const& e) {
        throw FormatError(std::string("covariance model: ") + e.what());
    }
}

inline void save_covariance(std::string const& path, CovarianceModel const& m) {
    auto out = io_detail::open_out(path);
    out << to_json(m).dump(1) << '\n';
}

inline CovarianceModel load_covariance(std::string const& path) {
    auto in = io_detail::open_in(path);
    try {
        return covariance_from_json(Json::parse(in));
    } catch (Json::parse_error const& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

// ---- track history ----------------------------------------------------------

inline Json to_json(StepDiagnostics const& d) {
    Json per_depth = Json::array();
    for (double c : d.best_cost_per_depth) per_depth.push_back(io_detail::number(c));
    return {{"frame", d.frame},
            {"depth", d.depth},
            {"nodes_expanded", d.nodes_expanded},
            {"pruned_by_gate", d.pruned_by_gate},
            {"pruned_by_intersection", d.pruned_by_intersection},
            {"pruned_by_bound", d.pruned_by_bound},
            {"chosen_path_cost", io_detail::number(d.chosen_path_cost)},
            {"best_cost_per_depth", per_depth},
            {"complete_path", d.complete_path},
            {"intersection_fallback", d.intersection_fallback}};
}

inline StepDiagnostics diagnostics_from_json(Json const& j) {
    StepDiagnostics d;
    d.frame = j.value("frame", std::size_t{0});
    d.depth = j.value("depth", std::size_t{0});
    d.nodes_expanded = j.value("nodes_expanded", std::size_t{0});
    d.pruned_by_gate = j.value("pruned_by_gate", std::size_t{0});
    d.pruned_by_intersection = j.value("pruned_by_intersection", std::size_t{0});
    d.pruned_by_bound = j.value("pruned_by_bound", std::size_t{0});
    d.chosen_path_cost = io_detail::number(j.value("chosen_path_cost", Json(0.0)));
    for (auto const& c : j.value("best_cost_per_depth", Json::array())) d.best_cost_per_depth.push_back(io_detail::number(c));
    d.complete_path = j.value("complete_path", true);
    d.intersection_fallback = j.value("intersection_fallback", false);
    return d;
}

inline Json to_json(FrameRecord const& r) {
    return {{"type", "frame"},
            {"frame", r.frame},
            {"proposed", to_json(r.proposed)},
            {"committed", to_json(r.committed)},
            {"assignment", r.chosen.assignment},
            {"unary_cost", io_detail::number(r.chosen.unary_cost)},
            {"model_cost", io_detail::number(r.chosen.model_cost)},
            {"cumulative_cost", io_detail::number(r.chosen.cumulative_cost)},
            {"error", r.error},
            {"diagnostics", to_json(r.diagnostics)}};
}

inline FrameRecord frame_record_from_json(Json const& j) {
    FrameRecord r;
    r.frame = io_detail::field(j, "frame").get<std::size_t>();
    r.proposed = track_state_from_json(io_detail::field(j, "proposed"));
    r.committed = track_state_from_json(io_detail::field(j, "committed"));
    r.chosen.assignment = io_detail::field(j, "assignment").get<Assignment>();
    r.chosen.completed_state = r.proposed;
    r.chosen.unary_cost = io_detail::number(j.value("unary_cost", Json(0.0)));
    r.chosen.model_cost = io_detail::number(j.value("model_cost", Json(0.0)));
    r.chosen.cumulative_cost = io_detail::number(j.value("cumulative_cost", Json(0.0)));
    r.error = j.value("error", false);
    if (j.contains("diagnostics")) r.diagnostics = diagnostics_from_json(j["diagnostics"]);
    return r;
}

/// Header line with the initial state, then one line per tracked frame.
inline void write_history(std::ostream& os, TrackHistory const& h) {
    Json head = {{"format", kHistoryFormat}, {"version", kFormatVersion}, {"type", "header"}, {"initial", to_json(h.initial)}};
    os << head.dump() << '\n';
    for (auto const& r : h.frames) os << to_json(r).dump() << '\n';
}

inline TrackHistory read_history(std::istream& in) {
    auto lines = io_detail::read_lines(in);
    if (lines.empty()) throw FormatError("empty history");
    io_detail::check_header(lines.front(), kHistoryFormat);
    TrackHistory h;
    try {
        h.initial = track_state_from_json(io_detail::field(lines.front(), "initial"));
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (lines[i].value("type", std::string()) != "frame") throw FormatError("history: unexpected record");
            h.frames.push_back(frame_record_from_json(lines[i]));
        }
    } catch (Json::exception const& e) {
        throw FormatError(std::string("history: ") + e.what());
    }
    return h;
}

inline void save_history(std::string const& path, TrackHistory const& h) {
    auto out = io_detail::open_out(path);
    write_history(out, h);
}

inline TrackHistory load_history(std::string const& path) {
    auto in = io_detail::open_in(path);
    return read_history(in);
}

// ---- simulator config ---------------------------------------------------------

inline Json to_json(SimConfig const& c) {
    auto const& m = c.motion;
    auto const& k = c.corruption;
    return {{"pair_count", c.pair_count},
            {"frame_count", c.frame_count},
            {"seed", c.seed},
            {"body_length", c.body_length},
            {"lateral_separation", c.lateral_separation},
            {"coil_bend", c.coil_bend},
            {"coil_twist", c.coil_twist},
            {"motion",
             {{"drift_sigma", m.drift_sigma},
              {"twitch_probability", m.twitch_probability},
              {"twitch_rotation_max", m.twitch_rotation_max},
              {"twitch_relaxation", m.twitch_relaxation},
              {"bend_amplitude", m.bend_amplitude},
              {"bend_frequency", m.bend_frequency}}},
            {"corruption",
             {{"noise_sigma", k.noise_sigma},
              {"dropout_probability", k.dropout_probability},
              {"debris_rate", k.debris_rate},
              {"debris_box", k.debris_box},
              {"merge_distance", k.merge_distance}}}};
}

namespace io_detail {

// Copies present keys onto defaults; unknown keys are rejected so typos fail loudly.
template <typename T>
void take(Json const& j, char const* key, T& into, std::vector<std::string>& seen) {
    seen.emplace_back(key);
    if (auto it = j.find(key); it != j.end()) into = it->get<T>();
}

inline void reject_unknown(Json const& j, std::vector<std::string> const& known, std::string const& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw InvalidConfig(where + ": unknown key '" + it.key() + "'");
        }
    }
}

}  // namespace io_detail

/// Missing keys keep their defaults.
inline SimConfig sim_config_from_json(Json const& j) {
    if (!j.is_object()) throw InvalidConfig("simulator config must be a JSON object");
    SimConfig c;
    try {
        std::vector<std::string> top;
        io_detail::take(j, "pair_count", c.pair_count, top);
        io_detail::take(j, "frame_count", c.frame_count, top);
        io_detail::take(j, "seed", c.seed, top);
        io_detail::take(j, "body_length", c.body_length, top);
        io_detail::take(j, "lateral_separation", c.lateral_separation, top);
        io_detail::take(j, "coil_bend", c.coil_bend, top);
        io_detail::take(j, "coil_twist", c.coil_twist, top);
        top.emplace_back("motion");
        top.emplace_back("corruption");
        io_detail::reject_unknown(j, top, "config");
        if (auto it = j.find("motion"); it != j.end()) {
            std::vector<std::string> keys;
            auto& m = c.motion;
            io_detail::take(*it, "drift_sigma", m.drift_sigma, keys);
            io_detail::take(*it, "twitch_probability", m.twitch_probability, keys);
            io_detail::take(*it, "twitch_rotation_max", m.twitch_rotation_max, keys);
            io_detail::take(*it, "twitch_relaxation", m.twitch_relaxation, keys);
            io_detail::take(*it, "bend_amplitude", m.bend_amplitude, keys);
            io_detail::take(*it, "bend_frequency", m.bend_frequency, keys);
            io_detail::reject_unknown(*it, keys, "config.motion");
        }
        if (auto it = j.find("corruption"); it != j.end()) {
            std::vector<std::string> keys;
            auto& k = c.corruption;
            io_detail::take(*it, "noise_sigma", k.noise_sigma, keys);
            io_detail::take(*it, "dropout_probability", k.dropout_probability, keys);
            io_detail::take(*it, "debris_rate", k.debris_rate, keys);
            io_detail::take(*it, "debris_box", k.debris_box, keys);
            io_detail::take(*it, "merge_distance", k.merge_distance, keys);
            io_detail::reject_unknown(*it, keys, "config.corruption");
        }
    } catch (Json::exception const& e) {
        throw InvalidConfig(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline SimConfig load_sim_config(std::string const& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    try {
        return sim_config_from_json(Json::parse(in));
    } catch (Json::parse_error const& e) {
        throw InvalidConfig("'" + path + "': " + e.what());
    }
}

}  // namespace mhht
