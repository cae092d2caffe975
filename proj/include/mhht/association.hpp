#pragma once

#include "mhht/core.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mhht {

using FeatureVector = Eigen::VectorXd;

/// Edge lengths ||z_u - z_v|| in graph edge order.
inline FeatureVector edge_features(TrackState const& state, EmbryoGraph const& graph) {
    if (state.size() != graph.vertex_count()) {
        throw DimensionMismatch("edge_features: state has " + std::to_string(state.size()) + " objects, graph has " +
                                std::to_string(graph.vertex_count()));
    }
    auto const& edges = graph.edges();
    FeatureVector f(static_cast<Eigen::Index>(edges.size()));
    for (std::size_t j = 0; j < edges.size(); ++j) {
        f(static_cast<Eigen::Index>(j)) = (state.positions[edges[j].u] - state.positions[edges[j].v]).norm();
    }
    return f;
}

/// Stacked coordinates (x0, y0, z0, x1, ...), 3n values.
inline FeatureVector movement_features(TrackState const& state) {
    FeatureVector f(static_cast<Eigen::Index>(3 * state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) f.segment<3>(static_cast<Eigen::Index>(3 * i)) = state.positions[i];
    return f;
}

enum class CovarianceKind { posture, movement };

inline char const* to_string(CovarianceKind k) { return k == CovarianceKind::posture ? "posture" : "movement"; }

inline CovarianceKind covariance_kind_from_string(std::string const& s) {
    if (s == "posture") return CovarianceKind::posture;
    if (s == "movement") return CovarianceKind::movement;
    throw InvalidConfig("unknown covariance kind '" + s + "'");
}

/// Fitted step-difference statistics. `covariance` is the sample estimate;
/// `precision` inverts covariance + epsilon * I.
struct CovarianceModel {
    CovarianceKind kind = CovarianceKind::posture;
    Eigen::VectorXd mean_diff;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd precision;
    double epsilon = 0.0;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(covariance.rows()); }

    [[nodiscard]] Eigen::MatrixXd regularized() const {
        return covariance + epsilon * Eigen::MatrixXd::Identity(covariance.rows(), covariance.cols());
    }
};

inline double default_epsilon(Eigen::MatrixXd const& covariance) {
    // Relative ridge, floored so an all-zero estimate still inverts.
    constexpr double kRelative = 1e-6;
    constexpr double kFloor = 1e-9;
    auto const dim = static_cast<double>(std::max<Eigen::Index>(1, covariance.rows()));
    return std::max(kRelative * covariance.trace() / dim, kFloor);
}

/// Assembles a model from a covariance estimate, computing the precision.
inline CovarianceModel make_covariance_model(CovarianceKind kind, Eigen::VectorXd mean_diff,
                                             Eigen::MatrixXd covariance, std::optional<double> epsilon = std::nullopt) {
    if (covariance.rows() != covariance.cols() || mean_diff.size() != covariance.rows()) {
        throw DimensionMismatch("make_covariance_model: inconsistent dimensions");
    }
    CovarianceModel m;
    m.kind = kind;
    m.mean_diff = std::move(mean_diff);
    m.covariance = 0.5 * (covariance + covariance.transpose());
    m.epsilon = epsilon ? *epsilon : default_epsilon(m.covariance);
    if (m.epsilon < 0.0 || !std::isfinite(m.epsilon)) throw InvalidConfig("covariance epsilon must be finite and >= 0");

    Eigen::MatrixXd reg = m.regularized();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() <= 0.0).any()) {
        throw InvalidConfig("covariance is not positive definite after regularization");
    }
    Eigen::MatrixXd precision = ldlt.solve(Eigen::MatrixXd::Identity(reg.rows(), reg.cols()));
    m.precision = 0.5 * (precision + precision.transpose());
    return m;
}

/// Covariance of consecutive feature differences: T-1 steps, mean-centred,
/// unbiased denominator T-2, ridge epsilon * I before inversion.
inline CovarianceModel fit_covariance(std::vector<FeatureVector> const& sequence,
                                      CovarianceKind kind = CovarianceKind::posture,
                                      std::optional<double> epsilon = std::nullopt) {
    if (sequence.size() < 3) throw InsufficientData("fit_covariance: need at least 3 feature vectors");
    auto const dim = sequence.front().size();
    for (auto const& f : sequence) {
        if (f.size() != dim) throw DimensionMismatch("fit_covariance: feature vectors differ in length");
        if (!f.allFinite()) throw InvalidConfig("fit_covariance: non-finite feature");
    }
    auto const steps = static_cast<Eigen::Index>(sequence.size() - 1);
    Eigen::MatrixXd diffs(dim, steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
        diffs.col(t) = sequence[static_cast<std::size_t>(t + 1)] - sequence[static_cast<std::size_t>(t)];
    }
    Eigen::VectorXd mean = diffs.rowwise().mean();
    Eigen::MatrixXd centred = diffs.colwise() - mean;
    Eigen::MatrixXd cov = (centred * centred.transpose()) / static_cast<double>(steps - 1);
    return make_covariance_model(kind, std::move(mean), std::move(cov), epsilon);
}

inline CovarianceModel fit_posture_covariance(std::vector<TrackState> const& states, EmbryoGraph const& graph,
                                              std::optional<double> epsilon = std::nullopt) {
    std::vector<FeatureVector> f;
    f.reserve(states.size());
    for (auto const& s : states) f.push_back(edge_features(s, graph));
    return fit_covariance(f, CovarianceKind::posture, epsilon);
}

inline CovarianceModel fit_movement_covariance(std::vector<TrackState> const& states,
                                               std::optional<double> epsilon = std::nullopt) {
    std::vector<FeatureVector> f;
    f.reserve(states.size());
    for (auto const& s : states) f.push_back(movement_features(s));
    return fit_covariance(f, CovarianceKind::movement, epsilon);
}

/// Keeps only the 3x3 blocks of graph-adjacent object pairs (and the diagonal
/// blocks) of a full movement covariance. If the truncation loses positive
/// semi-definiteness the spectrum is shifted up to zero.
inline CovarianceModel block_sparse_movement(CovarianceModel const& full, EmbryoGraph const& graph,
                                             std::optional<double> epsilon = std::nullopt) {
    auto const n = graph.vertex_count();
    if (full.kind != CovarianceKind::movement || full.dim() != 3 * n) {
        throw DimensionMismatch("block_sparse_movement: expected a 3n x 3n movement covariance");
    }
    Eigen::MatrixXd sparse = Eigen::MatrixXd::Zero(full.covariance.rows(), full.covariance.cols());
    auto copy_block = [&](std::size_t a, std::size_t b) {
        auto ia = static_cast<Eigen::Index>(3 * a), ib = static_cast<Eigen::Index>(3 * b);
        sparse.block<3, 3>(ia, ib) = full.covariance.block<3, 3>(ia, ib);
    };
    for (std::size_t i = 0; i < n; ++i) {
        copy_block(i, i);
        for (auto j : graph.neighbours(i)) copy_block(i, j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sparse, Eigen::EigenvaluesOnly);
    double lowest = es.eigenvalues().minCoeff();
    if (lowest < 0.0) sparse.diagonal().array() -= lowest;
    return make_covariance_model(CovarianceKind::movement, full.mean_diff, std::move(sparse), epsilon);
}

/// sqrt((current - previous)' P (current - previous)). The fitted mean step is
/// deliberately not subtracted.
inline double mahalanobis_cost(FeatureVector const& current, FeatureVector const& previous,
                               CovarianceModel const& model) {
    if (current.size() != previous.size() || static_cast<std::size_t>(current.size()) != model.dim()) {
        throw DimensionMismatch("mahalanobis_cost: dimension mismatch");
    }
    Eigen::VectorXd d = current - previous;
    double q = d.dot(model.precision * d);
    return std::sqrt(std::max(0.0, q));
}

enum class ModelVariant { mht, embryo, posture, movement, pm };

inline char const* to_string(ModelVariant v) {
    switch (v) {
    case ModelVariant::mht: return "mht";
    case ModelVariant::embryo: return "embryo";
    case ModelVariant::posture: return "posture";
    case ModelVariant::movement: return "movement";
    case ModelVariant::pm: return "pm";
    }
    return "unknown";
}

inline ModelVariant model_variant_from_string(std::string const& s) {
    if (s == "mht") return ModelVariant::mht;
    if (s == "embryo") return ModelVariant::embryo;
    if (s == "posture") return ModelVariant::posture;
    if (s == "movement") return ModelVariant::movement;
    if (s == "pm") return ModelVariant::pm;
    throw InvalidConfig("unknown association model '" + s + "'");
}

struct AssociationModel {
    ModelVariant variant = ModelVariant::mht;
    EmbryoGraph graph;
    std::optional<CovarianceModel> posture_cov;
    std::optional<CovarianceModel> movement_cov;
    double unary_weight = 1.0;

    [[nodiscard]] bool needs_posture() const {
        return variant == ModelVariant::posture || variant == ModelVariant::pm;
    }
    [[nodiscard]] bool needs_movement() const {
        return variant == ModelVariant::movement || variant == ModelVariant::pm;
    }

    /// Factor on the unary (assignment) cost inside the model cost.
    [[nodiscard]] double unary_factor() const {
        switch (variant) {
        case ModelVariant::mht: return 1.0;
        case ModelVariant::movement: return 0.0;
        default: return unary_weight;
        }
    }

    void validate() const {
        if (!(unary_weight >= 0.0) || !std::isfinite(unary_weight)) {
            throw InvalidConfig("unary weight must be finite and >= 0");
        }
        auto const n = graph.vertex_count();
        if (needs_posture()) {
            if (!posture_cov) throw InvalidConfig(std::string(to_string(variant)) + " model needs a posture covariance");
            if (posture_cov->dim() != graph.edge_count()) {
                throw DimensionMismatch("posture covariance dimension does not match the graph's edge count");
            }
        }
        if (needs_movement()) {
            if (!movement_cov) {
                throw InvalidConfig(std::string(to_string(variant)) + " model needs a movement covariance");
            }
            if (movement_cov->dim() != 3 * n) {
                throw DimensionMismatch("movement covariance dimension does not match 3n");
            }
        }
    }
};

/// Model cost of moving from `prev` to `completed` given the hypothesis'
/// unary assignment cost.
inline double evaluate_state(AssociationModel const& model, TrackState const& completed, TrackState const& prev,
                             double unary) {
    switch (model.variant) {
    case ModelVariant::mht: return unary;
    case ModelVariant::embryo:
        return (edge_features(completed, model.graph) - edge_features(prev, model.graph)).norm() +
               model.unary_weight * unary;
    case ModelVariant::posture:
    case ModelVariant::movement:
    case ModelVariant::pm: {
        model.validate();
        double cost = 0.0;
        if (model.needs_posture()) {
            cost += mahalanobis_cost(edge_features(completed, model.graph), edge_features(prev, model.graph),
                                     *model.posture_cov);
        }
        if (model.needs_movement()) {
            cost += mahalanobis_cost(movement_features(completed), movement_features(prev), *model.movement_cov);
        }
        return cost + model.unary_factor() * unary;
    }
    }
    return unary;
}

inline double evaluate_hypothesis(AssociationModel const& model, Hypothesis const& hyp, TrackState const& prev,
                                  double unary) {
    return evaluate_state(model, hyp.completed_state, prev, unary);
}

}  // namespace mhht
