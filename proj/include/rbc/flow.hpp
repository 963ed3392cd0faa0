#pragma once

// Flow algebra on Bernoulli probabilities and the composed conditional
// probability of the three-flow binary model.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbc/errors.hpp"

namespace rbc {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// ScOdds scales the odds p/(1-p), ScRisk1 scales p, ScRisk0 scales 1-p; each by e^v.
enum class FlowKind { ScOdds, ScRisk1, ScRisk0 };

inline constexpr std::array<FlowKind, 3> canonical_flow_order{
    FlowKind::ScOdds, FlowKind::ScRisk1, FlowKind::ScRisk0};

inline std::string_view to_string(FlowKind kind)
{
    switch (kind) {
        case FlowKind::ScOdds: return "ScOdds";
        case FlowKind::ScRisk1: return "ScRisk1";
        case FlowKind::ScRisk0: return "ScRisk0";
    }
    return "?";
}

/// Accepts the flow names ("ScOdds") and the short CLI spellings ("odds", "risk1", "risk0").
inline FlowKind parse_flow_kind(std::string_view name)
{
    if (name == "ScOdds" || name == "odds") return FlowKind::ScOdds;
    if (name == "ScRisk1" || name == "risk1") return FlowKind::ScRisk1;
    if (name == "ScRisk0" || name == "risk0") return FlowKind::ScRisk0;
    throw ConfigError("unknown flow kind '" + std::string(name) + "'");
}

inline std::size_t flow_slot(FlowKind kind) { return static_cast<std::size_t>(kind); }

template <class Scalar>
struct FlowSpec {
    FlowKind kind = FlowKind::ScOdds;
    bool has_intercept = false;
    Scalar intercept = Scalar(0);
    std::vector<Eigen::Index> covariate_indices;
    Vector<Scalar> coefficients;

    /// Zero-initialised flow over the given design columns.
    static FlowSpec zeros(FlowKind kind, bool has_intercept, std::vector<Eigen::Index> indices)
    {
        FlowSpec flow;
        flow.kind = kind;
        flow.has_intercept = has_intercept;
        flow.covariate_indices = std::move(indices);
        flow.coefficients = Vector<Scalar>::Zero(static_cast<Eigen::Index>(flow.covariate_indices.size()));
        return flow;
    }

    /// Number of free parameters: covariate coefficients plus the intercept when present.
    Eigen::Index parameter_count() const
    {
        return coefficients.size() + (has_intercept ? 1 : 0);
    }

    void validate() const
    {
        if (coefficients.size() != static_cast<Eigen::Index>(covariate_indices.size()))
            throw StructuralError("flow " + std::string(to_string(kind)) + ": "
                                  + std::to_string(coefficients.size()) + " coefficients for "
                                  + std::to_string(covariate_indices.size()) + " covariates");
        if (!has_intercept && intercept != Scalar(0))
            throw StructuralError("flow " + std::string(to_string(kind))
                                  + ": intercept must be 0 when the flow has no intercept");
        for (auto idx : covariate_indices)
            if (idx < 0)
                throw StructuralError("flow " + std::string(to_string(kind)) + ": negative covariate index");
    }
};

template <class Scalar>
struct ModelSpec {
    Scalar p0 = Scalar(0.5);
    std::vector<FlowSpec<Scalar>> flows;

    void validate() const
    {
        if (!(p0 > Scalar(0) && p0 < Scalar(1)))
            throw StructuralError("reference probability p0 must lie strictly inside (0,1)");
        std::array<bool, 3> seen{};
        for (const auto& flow : flows) {
            flow.validate();
            auto& s = seen[flow_slot(flow.kind)];
            if (s)
                throw StructuralError("flow " + std::string(to_string(flow.kind)) + " appears twice");
            s = true;
        }
    }

    const FlowSpec<Scalar>* find(FlowKind kind) const
    {
        for (const auto& flow : flows)
            if (flow.kind == kind) return &flow;
        return nullptr;
    }
    FlowSpec<Scalar>* find(FlowKind kind)
    {
        for (auto& flow : flows)
            if (flow.kind == kind) return &flow;
        return nullptr;
    }

    Eigen::Index parameter_count() const
    {
        Eigen::Index total = 0;
        for (const auto& flow : flows) total += flow.parameter_count();
        return total;
    }

    /// Largest covariate index referenced by any flow, or -1.
    Eigen::Index max_covariate_index() const
    {
        Eigen::Index m = -1;
        for (const auto& flow : flows)
            for (auto idx : flow.covariate_indices) m = std::max(m, idx);
        return m;
    }
};

template <class Scalar>
struct Dataset {
    Matrix<Scalar> X;
    Vector<Scalar> y;
    std::vector<std::string> feature_names;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }

    void validate() const
    {
        if (X.rows() < 1 || X.cols() < 1)
            throw DataError("dataset needs at least one row and one column");
        if (y.size() != X.rows())
            throw DataError("outcome length " + std::to_string(y.size()) + " does not match "
                            + std::to_string(X.rows()) + " design rows");
        if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != X.cols())
            throw DataError("feature name count does not match design columns");
        if (!X.allFinite())
            throw DataError("design matrix has non-finite entries");
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y[i] != Scalar(0) && y[i] != Scalar(1))
                throw DataError("outcome must be 0/1", static_cast<long>(i + 1));
    }

    /// Rows selected by index, preserving order.
    Dataset subset(const std::vector<Eigen::Index>& rows) const
    {
        Dataset out;
        out.X = X(rows, Eigen::all);
        out.y = y(rows);
        out.feature_names = feature_names;
        return out;
    }
};

/// intercept + sum_j coefficients[j] * x[covariate_indices[j]]
template <class Scalar, class Derived>
Scalar linear_predictor(const FlowSpec<Scalar>& flow, const Eigen::MatrixBase<Derived>& x)
{
    Scalar eta = flow.intercept;
    for (std::size_t j = 0; j < flow.covariate_indices.size(); ++j) {
        const auto idx = flow.covariate_indices[j];
        if (idx >= x.size())
            throw StructuralError("flow " + std::string(to_string(flow.kind)) + ": covariate index "
                                  + std::to_string(idx) + " out of range for input of length "
                                  + std::to_string(x.size()));
        eta += flow.coefficients[static_cast<Eigen::Index>(j)] * x(idx);
    }
    return eta;
}

/// Linear predictor for every row of X.
template <class Scalar>
Vector<Scalar> linear_predictors(const FlowSpec<Scalar>& flow, const Matrix<Scalar>& X)
{
    for (auto idx : flow.covariate_indices)
        if (idx >= X.cols())
            throw StructuralError("flow " + std::string(to_string(flow.kind)) + ": covariate index "
                                  + std::to_string(idx) + " out of range for "
                                  + std::to_string(X.cols()) + " design columns");
    Vector<Scalar> eta = Vector<Scalar>::Constant(X.rows(), flow.intercept);
    if (!flow.covariate_indices.empty())
        eta.noalias() += X(Eigen::all, flow.covariate_indices) * flow.coefficients;
    return eta;
}

/// Action of a single flow on a probability. Risk flows may leave [0,1]; no clamping here.
template <class Scalar>
Scalar apply_flow(Scalar p, FlowKind kind, Scalar v)
{
    using std::exp;
    const Scalar ev = exp(v);
    switch (kind) {
        case FlowKind::ScOdds: {
            if (p == Scalar(1)) return p;
            return p * ev / (Scalar(1) - p + p * ev);
        }
        case FlowKind::ScRisk1: return p * ev;
        case FlowKind::ScRisk0: return Scalar(1) - (Scalar(1) - p) * ev;
    }
    return p;
}

/// Value of a flow action with its partial derivatives in v and in the incoming p.
template <class Scalar>
struct FlowStep {
    Scalar value;
    Scalar d_dv;
    Scalar d_dp;
};

template <class Scalar>
FlowStep<Scalar> apply_flow_with_partials(Scalar p, FlowKind kind, Scalar v)
{
    using std::exp;
    const Scalar ev = exp(v);
    switch (kind) {
        case FlowKind::ScOdds: {
            const Scalar denom = Scalar(1) - p + p * ev;
            const Scalar out = p * ev / denom;
            return {out, out * (Scalar(1) - out), ev / (denom * denom)};
        }
        case FlowKind::ScRisk1: {
            const Scalar out = p * ev;
            return {out, out, ev};
        }
        case FlowKind::ScRisk0: {
            const Scalar out = Scalar(1) - (Scalar(1) - p) * ev;
            return {out, out - Scalar(1), ev};
        }
    }
    return {p, Scalar(0), Scalar(1)};
}

/// Folds the flows over p0 in model order.
template <class Scalar, class Derived>
Scalar compose_probability(const ModelSpec<Scalar>& model, const Eigen::MatrixBase<Derived>& x)
{
    Scalar p = model.p0;
    for (const auto& flow : model.flows)
        p = apply_flow(p, flow.kind, linear_predictor(flow, x));
    return p;
}

/// Composed probability for every row of X.
template <class Scalar>
Vector<Scalar> compose_probabilities(const ModelSpec<Scalar>& model, const Matrix<Scalar>& X)
{
    Vector<Scalar> p = Vector<Scalar>::Constant(X.rows(), model.p0);
    for (const auto& flow : model.flows) {
        const Vector<Scalar> eta = linear_predictors(flow, X);
        for (Eigen::Index i = 0; i < X.rows(); ++i) p[i] = apply_flow(p[i], flow.kind, eta[i]);
    }
    return p;
}

template <class Scalar>
struct RidgePoint {
    Scalar gamma;
    Scalar delta;
};

/// Risk-ratio / survival-ratio pairs (gamma, delta) that leave the canonical composition
/// p = 1 - (1 - gamma*q) * delta at p_star for odds theta, q = theta/(1+theta).
template <class Scalar>
std::vector<RidgePoint<Scalar>> nonident_family(Scalar theta, const std::vector<Scalar>& gamma_grid,
                                                Scalar p_star)
{
    if (!(theta > Scalar(0)))
        throw DomainError("theta must be positive");
    if (!(p_star > Scalar(0) && p_star < Scalar(1)))
        throw DomainError("p_star must lie strictly inside (0,1)");
    const Scalar q = theta / (Scalar(1) + theta);
    std::vector<RidgePoint<Scalar>> out;
    out.reserve(gamma_grid.size());
    for (Scalar gamma : gamma_grid) {
        if (!(gamma > Scalar(0)))
            throw DomainError("gamma grid values must be positive");
        const Scalar slack = Scalar(1) - gamma * q;
        if (!(slack > Scalar(0)))
            throw DomainError("gamma = " + std::to_string(static_cast<double>(gamma))
                              + " gives gamma*q >= 1; no survival ratio reaches p_star");
        out.push_back({gamma, (Scalar(1) - p_star) / slack});
    }
    return out;
}

/// Canonical three-flow model: odds flow with intercept on `odds_cols`, risk flows without
/// intercepts on their own column lists. Coefficients start at zero.
template <class Scalar = double>
ModelSpec<Scalar> canonical_model(std::vector<Eigen::Index> odds_cols, std::vector<Eigen::Index> risk1_cols,
                                  std::vector<Eigen::Index> risk0_cols, std::array<bool, 3> intercepts = {true, false, false},
                                  Scalar p0 = Scalar(0.5))
{
    ModelSpec<Scalar> model;
    model.p0 = p0;
    model.flows.push_back(FlowSpec<Scalar>::zeros(FlowKind::ScOdds, intercepts[0], std::move(odds_cols)));
    model.flows.push_back(FlowSpec<Scalar>::zeros(FlowKind::ScRisk1, intercepts[1], std::move(risk1_cols)));
    model.flows.push_back(FlowSpec<Scalar>::zeros(FlowKind::ScRisk0, intercepts[2], std::move(risk0_cols)));
    return model;
}

inline std::vector<Eigen::Index> column_range(Eigen::Index count)
{
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(count));
    for (Eigen::Index j = 0; j < count; ++j) cols[static_cast<std::size_t>(j)] = j;
    return cols;
}

} // namespace rbc
