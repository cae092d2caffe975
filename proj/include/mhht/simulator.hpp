#pragma once

#include "mhht/core.hpp"
#include "mhht/evaluation.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace mhht {

struct MotionConfig {
    double drift_sigma = 0.3;          ///< um; body drift step, joint-angle noise scale and per-cell wobble
    double twitch_probability = 0.1;   ///< per frame
    double twitch_rotation_max = 0.4;  ///< rad, largest total bend/yaw impulse of one twitch
    double twitch_relaxation = 0.8;    ///< fraction of a twitch impulse remaining after each frame
    double bend_amplitude = 0.15;      ///< rad, travelling dorsoventral wave
    double bend_frequency = 0.02;      ///< cycles per frame
};

struct CorruptionConfig {
    double noise_sigma = 0.0;          ///< um, isotropic detection noise
    double dropout_probability = 0.0;  ///< per object per frame
    double debris_rate = 0.0;          ///< mean debris points per frame (Poisson)
    double debris_box = 25.0;          ///< um, half-width of the debris box around the body centroid
    double merge_distance = 0.0;       ///< um, closer true points merge into one midpoint detection
};

struct SimConfig {
    std::size_t pair_count = 10;
    std::size_t frame_count = 200;
    std::uint64_t seed = 1;
    double body_length = 150.0;        ///< um, head pair to tail pair along the backbone
    double lateral_separation = 9.0;   ///< um, left/right distance within a pair
    double coil_bend = 0.85;           ///< rad per joint, baseline dorsoventral curvature
    double coil_twist = 0.30;          ///< rad per joint, baseline yaw giving the coil its pitch
    MotionConfig motion;
    CorruptionConfig corruption;

    void validate() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
        if (pair_count < 2) throw InvalidConfig("SimConfig: pair_count must be >= 2");
        if (frame_count < 1) throw InvalidConfig("SimConfig: frame_count must be >= 1");
        if (!(body_length > 0.0) || !(lateral_separation > 0.0)) {
            throw InvalidConfig("SimConfig: body_length and lateral_separation must be > 0");
        }
        if (!prob(motion.twitch_probability) || !prob(corruption.dropout_probability) ||
            !prob(motion.twitch_relaxation)) {
            throw InvalidConfig("SimConfig: probabilities must lie in [0, 1]");
        }
        if (!nonneg(motion.drift_sigma) || !nonneg(motion.twitch_rotation_max) || !nonneg(motion.bend_amplitude) ||
            !nonneg(motion.bend_frequency) || !nonneg(corruption.noise_sigma) || !nonneg(corruption.debris_rate) ||
            !nonneg(corruption.debris_box) || !nonneg(corruption.merge_distance)) {
            throw InvalidConfig("SimConfig: sigmas, rates and distances must be >= 0");
        }
        if (!std::isfinite(coil_bend) || !std::isfinite(coil_twist)) throw InvalidConfig("SimConfig: non-finite coil");
    }
};

/// Portable random source: mt19937_64 bits with fixed-algorithm transforms, so
/// a seed produces the same numbers under every standard library.
class SimRng {
public:
    explicit SimRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller (one draw per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double const u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Knuth's multiplication method.
    std::size_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        double const limit = std::exp(-mean);
        double p = uniform();
        std::size_t k = 0;
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }

    std::size_t below(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }

    Vec3 normal3() {
        double x = normal(), y = normal(), z = normal();
        return {x, y, z};
    }

private:
    std::mt19937_64 engine_;
};

struct SimOutput {
    EmbryoGraph graph;
    std::vector<TrackState> ground_truth;
    std::vector<DetectionSet> detections;
};

namespace detail {

struct Frame3 {
    Vec3 t, d, l;  // tangent, dorsal, lateral
};

inline Vec3 rotate(Vec3 const& v, Vec3 const& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()) * v;
}

}  // namespace detail

/// Synthetic coiled embryo. The backbone is a chain of pair centres; each
/// joint bends about the lateral axis (dorsoventral) and yaws about the dorsal
/// axis. A constant baseline of both gives a compact coil. On top sit a
/// travelling bending wave, mean-reverting joint noise, and twitches: sudden
/// bend/yaw impulses on a run of joints that relax over later frames. Left and
/// right cells sit on either side of the backbone along the lateral axis, so
/// lateral and longitudinal distances stay nearly rigid.
inline SimOutput generate(SimConfig const& cfg) {
    cfg.validate();
    SimRng rng(cfg.seed);
    auto const P = cfg.pair_count;
    auto const joints = P - 1;
    double const spacing = cfg.body_length / static_cast<double>(P - 1);
    double const half_width = 0.5 * cfg.lateral_separation;
    auto const& mo = cfg.motion;
    auto const& co = cfg.corruption;

    double const angle_sigma = mo.drift_sigma / spacing;
    constexpr double kNoiseReversion = 0.9;
    constexpr double kMaxBendDeviation = 0.9;
    constexpr double kMaxYawDeviation = 0.45;
    constexpr double kCentroidReversion = 0.98;
    // Per-cell wobble is capped so lateral edges stay rigid to within 20%.
    // Frame 0 draws it but stays exact, so the bound holds against frame 0.
    double const wobble_cap = 0.1 * cfg.lateral_separation;
    auto wobble = [&](std::size_t frame) {
        Vec3 w = mo.drift_sigma * rng.normal3();
        if (frame == 0) return Vec3(Vec3::Zero());
        double norm = w.norm();
        return norm > wobble_cap ? Vec3(w * (wobble_cap / norm)) : w;
    };

    std::vector<double> noise_bend(joints, 0.0), noise_yaw(joints, 0.0);
    std::vector<double> twitch_bend(joints, 0.0), twitch_yaw(joints, 0.0);
    Vec3 centre = Vec3::Zero();
    double spin = 0.0;  // slow whole-body rotation about the coil axis

    SimOutput out;
    out.graph = build_canonical_embryo_graph(P);
    out.ground_truth.reserve(cfg.frame_count);
    out.detections.reserve(cfg.frame_count);

    for (std::size_t f = 0; f < cfg.frame_count; ++f) {
        if (f > 0) {
            for (std::size_t k = 0; k < joints; ++k) {
                noise_bend[k] = kNoiseReversion * noise_bend[k] + angle_sigma * rng.normal();
                noise_yaw[k] = kNoiseReversion * noise_yaw[k] + 0.5 * angle_sigma * rng.normal();
                twitch_bend[k] *= mo.twitch_relaxation;
                twitch_yaw[k] *= mo.twitch_relaxation;
            }
            if (rng.uniform() < mo.twitch_probability) {
                std::size_t first = rng.below(joints);
                std::size_t len = 1 + rng.below(std::min<std::size_t>(3, joints - first));
                double bend = rng.uniform(-1.0, 1.0) * mo.twitch_rotation_max;
                double yaw = rng.uniform(-0.5, 0.5) * mo.twitch_rotation_max;
                for (std::size_t k = first; k < first + len; ++k) {
                    twitch_bend[k] += bend / static_cast<double>(len);
                    twitch_yaw[k] += yaw / static_cast<double>(len);
                }
            }
            centre = kCentroidReversion * centre + mo.drift_sigma * rng.normal3();
            spin = kNoiseReversion * spin + 0.2 * angle_sigma * rng.normal();
        }

        // Backbone from the head along the rotated frames.
        std::vector<Vec3> node(P);
        std::vector<Vec3> lateral(P);
        detail::Frame3 fr{Vec3::UnitX(), Vec3::UnitZ(), Vec3::UnitY()};
        node[0] = Vec3::Zero();
        lateral[0] = fr.l;
        double const phase = 2.0 * std::numbers::pi * mo.bend_frequency * static_cast<double>(f);
        for (std::size_t k = 0; k < joints; ++k) {
            double wave = mo.bend_amplitude * std::sin(phase - 0.7 * static_cast<double>(k));
            double bend = std::clamp(wave + noise_bend[k] + twitch_bend[k], -kMaxBendDeviation, kMaxBendDeviation);
            double yaw = std::clamp(noise_yaw[k] + twitch_yaw[k], -kMaxYawDeviation, kMaxYawDeviation);
            bend += cfg.coil_bend;
            yaw += cfg.coil_twist;
            fr.t = detail::rotate(fr.t, fr.l, bend);
            fr.d = detail::rotate(fr.d, fr.l, bend);
            fr.t = detail::rotate(fr.t, fr.d, yaw);
            fr.l = detail::rotate(fr.l, fr.d, yaw);
            node[k + 1] = node[k] + spacing * fr.t;
            lateral[k + 1] = fr.l;
        }
        Vec3 mean = Vec3::Zero();
        for (auto const& p : node) mean += p;
        mean /= static_cast<double>(P);
        Eigen::AngleAxisd body_spin(spin, Vec3::UnitY());

        std::vector<Vec3> cells(2 * P);
        for (std::size_t k = 0; k < P; ++k) {
            Vec3 c = body_spin * (node[k] - mean) + centre;
            Vec3 l = body_spin * lateral[k];
            cells[left_index(k)] = c + half_width * l + wobble(f);
            cells[right_index(k)] = c - half_width * l + wobble(f);
        }
        out.ground_truth.emplace_back(f, cells);

        // Detections: dropout, merging, noise, debris, shuffled order.
        std::vector<bool> visible(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) visible[i] = !(rng.uniform() < co.dropout_probability);
        std::vector<Vec3> pts;
        std::vector<bool> merged(cells.size(), false);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!visible[i] || merged[i]) continue;
            Vec3 p = cells[i];
            for (std::size_t j = i + 1; j < cells.size(); ++j) {
                if (!visible[j] || merged[j]) continue;
                if ((cells[i] - cells[j]).norm() < co.merge_distance) {
                    p = 0.5 * (cells[i] + cells[j]);
                    merged[j] = true;
                    break;
                }
            }
            if (co.noise_sigma > 0.0) p += co.noise_sigma * rng.normal3();
            pts.push_back(p);
        }
        Vec3 centroid = Vec3::Zero();
        for (auto const& c : cells) centroid += c;
        centroid /= static_cast<double>(cells.size());
        std::size_t debris = rng.poisson(co.debris_rate);
        for (std::size_t k = 0; k < debris; ++k) {
            pts.push_back(centroid + Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)) *
                                         co.debris_box);
        }
        for (std::size_t i = pts.size(); i > 1; --i) std::swap(pts[i - 1], pts[rng.below(i)]);
        out.detections.emplace_back(f, pts);
    }
    return out;
}

}  // namespace mhht
