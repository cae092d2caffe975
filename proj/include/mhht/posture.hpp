#pragma once

#include "mhht/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace mhht {

/// Natural cubic spline through 3-D points, parameterised by cumulative chord
/// length (uniform knots if two consecutive points coincide).
class NaturalSpline {
public:
    NaturalSpline() = default;

    explicit NaturalSpline(std::vector<Vec3> points) : points_(std::move(points)) {
        auto const n = points_.size();
        if (n < 2) throw InsufficientData("NaturalSpline: need at least 2 points");
        knots_.assign(n, 0.0);
        bool uniform = false;
        for (std::size_t i = 1; i < n; ++i) {
            double h = (points_[i] - points_[i - 1]).norm();
            if (!(h > 1e-12)) uniform = true;
            knots_[i] = knots_[i - 1] + h;
        }
        if (uniform) {
            for (std::size_t i = 0; i < n; ++i) knots_[i] = static_cast<double>(i);
        }
        // Second derivatives M with M_0 = M_{n-1} = 0 (Thomas algorithm).
        second_.assign(n, Vec3::Zero());
        if (n > 2) {
            std::vector<double> diag(n, 0.0), upper(n, 0.0);
            std::vector<Vec3> rhs(n, Vec3::Zero());
            for (std::size_t i = 1; i + 1 < n; ++i) {
                double h0 = knots_[i] - knots_[i - 1];
                double h1 = knots_[i + 1] - knots_[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((points_[i + 1] - points_[i]) / h1 - (points_[i] - points_[i - 1]) / h0);
            }
            for (std::size_t i = 2; i + 1 < n; ++i) {
                double h0 = knots_[i] - knots_[i - 1];
                double w = h0 / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for (std::size_t i = n - 2; i >= 1; --i) {
                second_[i] = (rhs[i] - upper[i] * second_[i + 1]) / diag[i];
                if (i == 1) break;
            }
        }
    }

    [[nodiscard]] std::vector<double> const& knots() const { return knots_; }
    [[nodiscard]] std::vector<Vec3> const& points() const { return points_; }

    [[nodiscard]] Vec3 operator()(double t) const {
        auto [i, a, b, h] = locate(t);
        return a * points_[i] + b * points_[i + 1] +
               ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * (h * h / 6.0);
    }

    [[nodiscard]] Vec3 derivative(double t) const {
        auto [i, a, b, h] = locate(t);
        return (points_[i + 1] - points_[i]) / h +
               ((1.0 - 3.0 * a * a) * second_[i] + (3.0 * b * b - 1.0) * second_[i + 1]) * (h / 6.0);
    }

    [[nodiscard]] Vec3 second_derivative(double t) const {
        auto [i, a, b, h] = locate(t);
        return a * second_[i] + b * second_[i + 1];
    }

private:
    struct Span {
        std::size_t i;
        double a, b, h;
    };

    [[nodiscard]] Span locate(double t) const {
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        std::size_t i = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
        i = std::min(i, knots_.size() - 2);
        double h = knots_[i + 1] - knots_[i];
        double b = (t - knots_[i]) / h;
        return {i, 1.0 - b, b, h};
    }

    std::vector<Vec3> points_;
    std::vector<double> knots_;
    std::vector<Vec3> second_;
};

struct PostureConfig {
    bool right_handed = true;  ///< positive angle = counter-clockwise looking down v2 towards its tip
};

/// Posture of one frame. Angles come per interval between adjacent seam cells:
/// left intervals first (anterior to posterior), then right.
struct PostureDescriptor {
    NaturalSpline left_spline;
    NaturalSpline right_spline;
    std::vector<Vec3> left_midpoints;   ///< spline points halfway between adjacent nuclei
    std::vector<Vec3> right_midpoints;
    std::vector<Vec3> v2;               ///< left midpoint to right midpoint, per interval
    std::vector<double> bend_angles;    ///< 2 * (pair_count - 1) values, rad
};

namespace detail {

// Signed angle from a to b about `axis`, after projecting both onto the plane
// normal to it. Degenerate projections give 0.
inline double signed_angle_about(Vec3 const& a, Vec3 const& b, Vec3 const& axis) {
    double const len = axis.norm();
    if (!(len > 1e-12)) return 0.0;
    Vec3 const u = axis / len;
    Vec3 const pa = a - a.dot(u) * u;
    Vec3 const pb = b - b.dot(u) * u;
    if (pa.norm() < 1e-12 || pb.norm() < 1e-12) return 0.0;
    return std::atan2(pa.cross(pb).dot(u), pa.dot(pb));
}

// Body direction at every nucleus of one side: the bisector of the two chords
// meeting there (exact tangent for points on a circular arc), and the spline
// tangent at the two ends or where a chord is degenerate.
inline std::vector<Vec3> side_directions(NaturalSpline const& spline) {
    auto const& p = spline.points();
    auto const& kn = spline.knots();
    std::vector<Vec3> dir(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        Vec3 d = spline.derivative(kn[k]);
        if (k > 0 && k + 1 < p.size()) {
            Vec3 a = p[k] - p[k - 1];
            Vec3 b = p[k + 1] - p[k];
            if (a.norm() > 1e-12 && b.norm() > 1e-12) {
                Vec3 bis = a.normalized() + b.normalized();
                if (bis.norm() > 1e-12) d = bis;
            }
        }
        dir[k] = d;
    }
    return dir;
}

}  // namespace detail

/// Fits each side with a natural cubic spline and measures dorsoventral bends:
/// for the interval between seam cells k and k+1 on a side, the turn of the
/// body direction from cell k to cell k+1 seen looking down v2, the vector
/// joining that interval's left and right spline midpoints.
inline PostureDescriptor fit_posture(TrackState const& state, EmbryoGraph const& graph,
                                     PostureConfig const& cfg = {}) {
    if (state.size() != graph.vertex_count()) throw DimensionMismatch("fit_posture: state/graph size differ");
    if (state.size() < 4 || state.size() % 2 != 0) throw DimensionMismatch("fit_posture: need >= 2 left/right pairs");
    std::size_t const P = state.size() / 2;
    std::vector<Vec3> left(P), right(P);
    for (std::size_t k = 0; k < P; ++k) {
        left[k] = state.positions[left_index(k)];
        right[k] = state.positions[right_index(k)];
    }
    PostureDescriptor d;
    d.left_spline = NaturalSpline(left);
    d.right_spline = NaturalSpline(right);
    auto const& kl = d.left_spline.knots();
    auto const& kr = d.right_spline.knots();
    for (std::size_t k = 0; k + 1 < P; ++k) {
        d.left_midpoints.push_back(d.left_spline(0.5 * (kl[k] + kl[k + 1])));
        d.right_midpoints.push_back(d.right_spline(0.5 * (kr[k] + kr[k + 1])));
        d.v2.push_back(d.right_midpoints.back() - d.left_midpoints.back());
    }
    double const sign = cfg.right_handed ? 1.0 : -1.0;
    for (auto const* spline : {&d.left_spline, &d.right_spline}) {
        auto const dir = detail::side_directions(*spline);
        for (std::size_t k = 0; k + 1 < P; ++k) {
            d.bend_angles.push_back(sign * detail::signed_angle_about(dir[k], dir[k + 1], d.v2[k]));
        }
    }
    return d;
}

inline std::vector<double> bend_angles(TrackState const& state, EmbryoGraph const& graph,
                                       PostureConfig const& cfg = {}) {
    return fit_posture(state, graph, cfg).bend_angles;
}

struct EigenDecomposition {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;               ///< columns, leading first
    std::vector<double> variance_fractions;   ///< nonincreasing, sum 1
    Eigen::MatrixXd scores;                   ///< frames x components

    [[nodiscard]] std::vector<double> cumulative() const {
        std::vector<double> out(variance_fractions.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = acc += variance_fractions[i];
        if (!out.empty()) out.back() = 1.0;
        return out;
    }

    /// Mean plus the first `count` components weighted by the frame's scores.
    [[nodiscard]] Eigen::VectorXd reconstruct(std::size_t frame, std::size_t count) const {
        auto const c = static_cast<Eigen::Index>(std::min<std::size_t>(count, components.cols()));
        return mean + components.leftCols(c) * scores.row(static_cast<Eigen::Index>(frame)).head(c).transpose();
    }
};

/// Mean-centred PCA of bend-angle vectors (sample covariance, denominator
/// T - 1). Each component's largest-magnitude entry is made positive; a
/// sequence with no variance reports fractions (1, 0, ...).
inline EigenDecomposition eigen_embryos(std::vector<std::vector<double>> const& sequence) {
    if (sequence.size() < 2) throw InsufficientData("eigen_embryos: need at least 2 frames");
    auto const dim = sequence.front().size();
    if (dim == 0) throw DimensionMismatch("eigen_embryos: empty angle vectors");
    auto const T = static_cast<Eigen::Index>(sequence.size());
    auto const D = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd X(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
        auto const& row = sequence[static_cast<std::size_t>(t)];
        if (row.size() != dim) throw DimensionMismatch("eigen_embryos: ragged angle vectors");
        for (Eigen::Index j = 0; j < D; ++j) X(t, j) = row[static_cast<std::size_t>(j)];
    }
    EigenDecomposition out;
    out.mean = X.colwise().mean().transpose();
    Eigen::MatrixXd const centred = X.rowwise() - out.mean.transpose();
    Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(T - 1);
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    out.components.resize(D, D);
    std::vector<double> values(dim);
    for (Eigen::Index j = 0; j < D; ++j) {
        Eigen::Index src = D - 1 - j;
        Eigen::VectorXd v = es.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        out.components.col(j) = v;
        values[static_cast<std::size_t>(j)] = std::max(0.0, es.eigenvalues()(src));
    }
    double total = 0.0;
    for (double v : values) total += v;
    out.variance_fractions.assign(dim, 0.0);
    if (total > 0.0) {
        for (std::size_t j = 0; j < dim; ++j) out.variance_fractions[j] = values[j] / total;
    } else {
        out.variance_fractions[0] = 1.0;
    }
    out.scores = centred * out.components;
    return out;
}

struct DiffusionFit {
    double coefficient = 0.0;   ///< um^2 / s
    double exponent = 1.0;      ///< log-log MSD slope; 1 for free diffusion
    bool nonlinear = false;     ///< |exponent - 1| > 0.3
    std::vector<double> msd;    ///< per lag 1..max_lag
};

namespace detail {

// Covariance, up to a constant factor, of overlapping-window MSD estimates of
// a Brownian track with `steps` increments, at lags 1..lags. Two windows of
// lags n <= m offset by d share o(d) increments and Cov(a^2, b^2) = 2 Cov(a, b)^2
// for Gaussians, so the entry is 2 sum_d count(d) o(d)^2 / (A B), A and B
// being the window counts. The sum has a closed form in power sums.
inline Eigen::MatrixXd brownian_msd_covariance(std::size_t lags, std::size_t steps) {
    auto s2 = [](double k) { return k * (k + 1.0) * (2.0 * k + 1.0) / 6.0; };
    auto s3 = [](double k) { return k * k * (k + 1.0) * (k + 1.0) / 4.0; };
    auto const L = static_cast<Eigen::Index>(lags);
    double const N = static_cast<double>(steps);
    Eigen::MatrixXd C(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
        for (Eigen::Index j = i; j < L; ++j) {
            double const n = static_cast<double>(i + 1), m = static_cast<double>(j + 1);
            double const A = N - n + 1.0, B = N - m + 1.0;
            double const S = (A - m) * s2(n - 1.0) + s3(n - 1.0) + (m - n) * B * n * n + (B - n) * s2(n) + s3(n);
            C(i, j) = C(j, i) = 2.0 * S / (A * B);
        }
    }
    return C;
}

}  // namespace detail

/// Fit of MSD(tau) = 6 D tau through the origin over lags 1..max(1, T/4), with
/// tau in seconds. Overlapping windows make the MSD values strongly
/// correlated, so the fit is generalized least squares under the covariance
/// those estimates have for Brownian motion.
inline DiffusionFit diffusion_fit(std::vector<Vec3> const& track, double dt) {
    if (track.size() < 10) throw InsufficientData("diffusion_coefficient: need at least 10 samples");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidConfig("diffusion_coefficient: dt must be > 0");
    std::size_t const max_lag = std::max<std::size_t>(1, track.size() / 4);
    DiffusionFit fit;
    std::vector<double> lx, ly;
    Eigen::VectorXd msd(static_cast<Eigen::Index>(max_lag)), tau(static_cast<Eigen::Index>(max_lag));
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double sum = 0.0;
        for (std::size_t i = 0; i + lag < track.size(); ++i) sum += (track[i + lag] - track[i]).squaredNorm();
        auto const k = static_cast<Eigen::Index>(lag - 1);
        msd(k) = sum / static_cast<double>(track.size() - lag);
        tau(k) = static_cast<double>(lag) * dt;
        fit.msd.push_back(msd(k));
        if (msd(k) > 0.0) {
            lx.push_back(std::log(tau(k)));
            ly.push_back(std::log(msd(k)));
        }
    }
    Eigen::VectorXd const w = detail::brownian_msd_covariance(max_lag, track.size() - 1).ldlt().solve(tau);
    fit.coefficient = w.dot(msd) / (6.0 * w.dot(tau));
    if (lx.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(lx.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        fit.exponent = sxx > 0.0 ? sxy / sxx : 1.0;
        fit.nonlinear = std::abs(fit.exponent - 1.0) > 0.3;
    }
    return fit;
}

inline double diffusion_coefficient(std::vector<Vec3> const& track, double dt) {
    return diffusion_fit(track, dt).coefficient;
}

}  // namespace mhht
