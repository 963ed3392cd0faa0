#pragma once

// Mean negative log-likelihood of the composed model, its analytic gradient, flow-specific
// penalties and their proximal operators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "rbc/flow.hpp"

namespace rbc {

enum class PenaltyKind { None, L1, L2, ElasticNet, AdaptiveL1 };

inline std::string_view to_string(PenaltyKind kind)
{
    switch (kind) {
        case PenaltyKind::None: return "none";
        case PenaltyKind::L1: return "l1";
        case PenaltyKind::L2: return "l2";
        case PenaltyKind::ElasticNet: return "enet";
        case PenaltyKind::AdaptiveL1: return "adaptive";
    }
    return "?";
}

inline PenaltyKind parse_penalty_kind(std::string_view name)
{
    if (name == "none") return PenaltyKind::None;
    if (name == "l1" || name == "lasso") return PenaltyKind::L1;
    if (name == "l2" || name == "ridge") return PenaltyKind::L2;
    if (name == "enet" || name == "elasticnet") return PenaltyKind::ElasticNet;
    if (name == "adaptive" || name == "adaptive-lasso") return PenaltyKind::AdaptiveL1;
    throw ConfigError("unknown penalty '" + std::string(name) + "'");
}

template <class Scalar>
struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::None;
    Scalar lambda = Scalar(0);
    /// L1 share of the elastic net; ignored for other kinds.
    Scalar alpha = Scalar(0.5);
    /// Per-coefficient weights, adaptive L1 only.
    std::optional<Vector<Scalar>> weights;

    void validate(const FlowSpec<Scalar>& flow) const
    {
        const std::string where = "penalty on " + std::string(to_string(flow.kind));
        if (!(lambda >= Scalar(0)))
            throw ConfigError(where + ": lambda must be non-negative");
        if (kind == PenaltyKind::ElasticNet && !(alpha >= Scalar(0) && alpha <= Scalar(1)))
            throw ConfigError(where + ": alpha must lie in [0,1]");
        if (kind == PenaltyKind::AdaptiveL1) {
            if (!weights)
                throw ConfigError(where + ": adaptive L1 requires weights");
            if (weights->size() != flow.coefficients.size())
                throw ConfigError(where + ": " + std::to_string(weights->size()) + " weights for "
                                  + std::to_string(flow.coefficients.size()) + " coefficients");
            if ((weights->array() < Scalar(0)).any() || !weights->allFinite())
                throw ConfigError(where + ": weights must be finite and non-negative");
        } else if (weights) {
            throw ConfigError(where + ": weights are only meaningful for adaptive L1");
        }
    }
};

template <class Scalar>
struct ObjectiveConfig {
    Scalar clamp_epsilon = Scalar(1e-9);
    std::map<FlowKind, PenaltySpec<Scalar>> penalties;
    bool penalize_intercepts = false;

    void validate() const
    {
        if (!(clamp_epsilon > Scalar(0) && clamp_epsilon < Scalar(1e-3)))
            throw ConfigError("clamp_epsilon must lie in (0, 1e-3)");
    }

    const PenaltySpec<Scalar>* penalty_for(FlowKind kind) const
    {
        auto it = penalties.find(kind);
        return it == penalties.end() ? nullptr : &it->second;
    }
};

/// psi(x) for one penalty kind; the weight vector is consulted by AdaptiveL1 only.
template <class Scalar, class Derived>
Scalar penalty_function(PenaltyKind kind, const Eigen::MatrixBase<Derived>& x, Scalar alpha,
                        const Vector<Scalar>* weights = nullptr)
{
    switch (kind) {
        case PenaltyKind::None: return Scalar(0);
        case PenaltyKind::L1: return x.template lpNorm<1>();
        case PenaltyKind::L2: return x.squaredNorm();
        case PenaltyKind::ElasticNet: return alpha * x.template lpNorm<1>() + (Scalar(1) - alpha) * x.squaredNorm();
        case PenaltyKind::AdaptiveL1:
            if (!weights) throw ConfigError("adaptive L1 requires weights");
            return (weights->array() * x.array().abs()).sum();
    }
    return Scalar(0);
}

template <class Scalar>
Scalar soft_threshold(Scalar z, Scalar threshold)
{
    using std::abs;
    const Scalar mag = abs(z) - threshold;
    if (mag <= Scalar(0)) return Scalar(0);
    return z > Scalar(0) ? mag : -mag;
}

/// argmin_x 0.5*||x - z||^2 + gamma*psi(x), coordinate-wise.
template <class Scalar>
Vector<Scalar> prox(PenaltyKind kind, const Vector<Scalar>& z, Scalar gamma, Scalar alpha = Scalar(0.5),
                    const Vector<Scalar>* weights = nullptr)
{
    if (!(gamma >= Scalar(0)))
        throw std::invalid_argument("prox: gamma must be non-negative");
    switch (kind) {
        case PenaltyKind::None: return z;
        case PenaltyKind::L1: return z.unaryExpr([gamma](Scalar v) { return soft_threshold(v, gamma); });
        case PenaltyKind::L2: return z / (Scalar(1) + Scalar(2) * gamma);
        case PenaltyKind::ElasticNet: {
            const Scalar shrink = Scalar(1) + Scalar(2) * gamma * (Scalar(1) - alpha);
            return z.unaryExpr([gamma, alpha, shrink](Scalar v) { return soft_threshold(v, gamma * alpha) / shrink; });
        }
        case PenaltyKind::AdaptiveL1: {
            if (!weights || weights->size() != z.size())
                throw ConfigError("adaptive L1 prox requires one weight per coordinate");
            Vector<Scalar> out(z.size());
            for (Eigen::Index j = 0; j < z.size(); ++j) out[j] = soft_threshold(z[j], gamma * (*weights)[j]);
            return out;
        }
    }
    return z;
}

/// Smooth part of the objective at one parameter vector.
template <class Scalar>
struct SmoothEvaluation {
    Scalar value = Scalar(0);
    Eigen::Index clamped = 0;
};

/// F = f + g for a fixed flow structure and dataset, on the packed parameter vector.
///
/// Packing order follows model.flows; inside a flow block the intercept (when present)
/// precedes the covariate coefficients.
template <class Scalar>
class CompositeObjective {
public:
    CompositeObjective(ModelSpec<Scalar> structure, const Dataset<Scalar>& data, ObjectiveConfig<Scalar> config)
        : structure_(std::move(structure)), y_(data.y), config_(std::move(config))
    {
        structure_.validate();
        config_.validate();
        if (structure_.max_covariate_index() >= data.d())
            throw StructuralError("model references covariate " + std::to_string(structure_.max_covariate_index())
                                  + " but the design has " + std::to_string(data.d()) + " columns");
        if (data.y.size() != data.X.rows())
            throw DataError("outcome length does not match design rows");

        Eigen::Index offset = 0;
        for (const auto& flow : structure_.flows) {
            Block block;
            block.kind = flow.kind;
            block.offset = offset;
            block.size = flow.parameter_count();
            block.has_intercept = flow.has_intercept;
            block.design.resize(data.n(), block.size);
            Eigen::Index c = 0;
            if (flow.has_intercept) block.design.col(c++).setOnes();
            for (auto idx : flow.covariate_indices) block.design.col(c++) = data.X.col(idx);
            if (const auto* pen = config_.penalty_for(flow.kind)) {
                pen->validate(flow);
                block.penalty = *pen;
            }
            offset += block.size;
            blocks_.push_back(std::move(block));
        }
        size_ = offset;
    }

    Eigen::Index size() const { return size_; }
    Eigen::Index n() const { return y_.size(); }
    const ModelSpec<Scalar>& structure() const { return structure_; }
    const ObjectiveConfig<Scalar>& config() const { return config_; }

    Vector<Scalar> pack(const ModelSpec<Scalar>& model) const
    {
        if (model.flows.size() != structure_.flows.size())
            throw StructuralError("model has a different number of flows than the objective");
        Vector<Scalar> theta(size_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& flow = model.flows[k];
            const auto& block = blocks_[k];
            if (flow.kind != block.kind || flow.parameter_count() != block.size)
                throw StructuralError("flow " + std::string(to_string(flow.kind)) + " does not match the objective layout");
            Eigen::Index c = block.offset;
            if (block.has_intercept) theta[c++] = flow.intercept;
            theta.segment(c, flow.coefficients.size()) = flow.coefficients;
        }
        return theta;
    }

    ModelSpec<Scalar> unpack(const Vector<Scalar>& theta) const
    {
        check_size(theta);
        ModelSpec<Scalar> model = structure_;
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            auto& flow = model.flows[k];
            const auto& block = blocks_[k];
            Eigen::Index c = block.offset;
            flow.intercept = block.has_intercept ? theta[c++] : Scalar(0);
            flow.coefficients = theta.segment(c, flow.coefficients.size());
        }
        return model;
    }

    /// Mean clamped negative log-likelihood; fills `gradient` when non-null.
    SmoothEvaluation<Scalar> smooth(const Vector<Scalar>& theta, Vector<Scalar>* gradient = nullptr) const
    {
        check_size(theta);
        const Eigen::Index n = y_.size();
        const std::size_t K = blocks_.size();
        const Scalar eps = config_.clamp_epsilon;

        Matrix<Scalar> eta(n, static_cast<Eigen::Index>(K));
        for (std::size_t k = 0; k < K; ++k)
            eta.col(static_cast<Eigen::Index>(k)).noalias() = blocks_[k].design * theta.segment(blocks_[k].offset, blocks_[k].size);

        Matrix<Scalar> weight;
        if (gradient) weight.setZero(n, static_cast<Eigen::Index>(K));

        SmoothEvaluation<Scalar> out;
        std::vector<FlowStep<Scalar>> steps(K);
        for (Eigen::Index i = 0; i < n; ++i) {
            Scalar p = structure_.p0;
            for (std::size_t k = 0; k < K; ++k) {
                steps[k] = apply_flow_with_partials(p, blocks_[k].kind, eta(i, static_cast<Eigen::Index>(k)));
                p = steps[k].value;
            }
            Scalar pt = p;
            bool clamped = false;
            if (!(p >= eps)) { pt = eps; clamped = true; }
            else if (!(p <= Scalar(1) - eps)) { pt = Scalar(1) - eps; clamped = true; }
            if (clamped) ++out.clamped;

            const bool event = y_[i] != Scalar(0);
            out.value -= event ? std::log(pt) : std::log1p(-pt);

            if (gradient && !clamped) {
                const Scalar dnll_dp = event ? -Scalar(1) / pt : Scalar(1) / (Scalar(1) - pt);
                // Reverse sweep: downstream carries d p_final / d p_k.
                Scalar downstream = Scalar(1);
                for (std::size_t k = K; k-- > 0;) {
                    weight(i, static_cast<Eigen::Index>(k)) = dnll_dp * steps[k].d_dv * downstream;
                    downstream *= steps[k].d_dp;
                }
            }
        }
        out.value /= static_cast<Scalar>(n);

        if (gradient) {
            gradient->resize(size_);
            for (std::size_t k = 0; k < K; ++k)
                gradient->segment(blocks_[k].offset, blocks_[k].size).noalias() =
                    blocks_[k].design.transpose() * weight.col(static_cast<Eigen::Index>(k)) / static_cast<Scalar>(n);
        }
        return out;
    }

    Scalar penalty(const Vector<Scalar>& theta) const
    {
        check_size(theta);
        Scalar total = Scalar(0);
        for (const auto& block : blocks_) {
            const auto& pen = block.penalty;
            if (pen.kind == PenaltyKind::None || pen.lambda == Scalar(0)) continue;
            const Eigen::Index start = block.offset + (block.has_intercept ? 1 : 0);
            const Eigen::Index count = block.size - (block.has_intercept ? 1 : 0);
            const Vector<Scalar> coefs = theta.segment(start, count);
            Scalar value = penalty_function(pen.kind, coefs, pen.alpha, pen.weights ? &*pen.weights : nullptr);
            if (block.has_intercept && config_.penalize_intercepts) {
                const Vector<Scalar> icpt = theta.segment(block.offset, 1);
                const Vector<Scalar> unit = Vector<Scalar>::Ones(1);
                value += penalty_function(pen.kind, icpt, pen.alpha, &unit);
            }
            total += pen.lambda * value;
        }
        return total;
    }

    /// Block-wise prox of step * g.
    Vector<Scalar> prox_step(const Vector<Scalar>& z, Scalar step) const
    {
        check_size(z);
        Vector<Scalar> out = z;
        for (const auto& block : blocks_) {
            const auto& pen = block.penalty;
            if (pen.kind == PenaltyKind::None || pen.lambda == Scalar(0)) continue;
            const Scalar gamma = step * pen.lambda;
            const Eigen::Index start = block.offset + (block.has_intercept ? 1 : 0);
            const Eigen::Index count = block.size - (block.has_intercept ? 1 : 0);
            const Vector<Scalar> seg = z.segment(start, count);
            out.segment(start, count) = prox(pen.kind, seg, gamma, pen.alpha, pen.weights ? &*pen.weights : nullptr);
            if (block.has_intercept && config_.penalize_intercepts) {
                const Vector<Scalar> icpt = z.segment(block.offset, 1);
                const Vector<Scalar> unit = Vector<Scalar>::Ones(1);
                out.segment(block.offset, 1) = prox(pen.kind, icpt, gamma, pen.alpha, &unit);
            }
        }
        return out;
    }

    Scalar total(const Vector<Scalar>& theta) const { return smooth(theta).value + penalty(theta); }

    /// Per-parameter description used by optimality checks: the penalty acting on each
    /// coordinate (None for unpenalized intercepts) and its effective L1 weight.
    struct Coordinate {
        FlowKind flow;
        bool intercept;
        PenaltyKind penalty;
        Scalar lambda;
        Scalar alpha;
        Scalar l1_weight;
    };

    std::vector<Coordinate> coordinates() const
    {
        std::vector<Coordinate> out;
        out.reserve(static_cast<std::size_t>(size_));
        for (const auto& block : blocks_) {
            for (Eigen::Index c = 0; c < block.size; ++c) {
                const bool icpt = block.has_intercept && c == 0;
                const bool penalized = !icpt || config_.penalize_intercepts;
                Coordinate coord{block.kind, icpt, penalized ? block.penalty.kind : PenaltyKind::None,
                                 block.penalty.lambda, block.penalty.alpha, Scalar(1)};
                if (penalized && block.penalty.kind == PenaltyKind::AdaptiveL1 && !icpt)
                    coord.l1_weight = (*block.penalty.weights)[c - (block.has_intercept ? 1 : 0)];
                out.push_back(coord);
            }
        }
        return out;
    }

private:
    struct Block {
        FlowKind kind;
        Eigen::Index offset = 0;
        Eigen::Index size = 0;
        bool has_intercept = false;
        Matrix<Scalar> design;
        PenaltySpec<Scalar> penalty;
    };

    void check_size(const Vector<Scalar>& theta) const
    {
        if (theta.size() != size_)
            throw StructuralError("parameter vector has " + std::to_string(theta.size()) + " entries, expected "
                                  + std::to_string(size_));
    }

    ModelSpec<Scalar> structure_;
    Vector<Scalar> y_;
    ObjectiveConfig<Scalar> config_;
    std::vector<Block> blocks_;
    Eigen::Index size_ = 0;
};

template <class Scalar>
Scalar nll(const ModelSpec<Scalar>& model, const Dataset<Scalar>& data, const ObjectiveConfig<Scalar>& config)
{
    CompositeObjective<Scalar> objective(model, data, config);
    return objective.smooth(objective.pack(model)).value;
}

/// Gradient of the mean NLL, concatenated per flow in model order (intercepts included).
template <class Scalar>
Vector<Scalar> nll_gradient(const ModelSpec<Scalar>& model, const Dataset<Scalar>& data,
                            const ObjectiveConfig<Scalar>& config)
{
    CompositeObjective<Scalar> objective(model, data, config);
    Vector<Scalar> grad;
    objective.smooth(objective.pack(model), &grad);
    return grad;
}

template <class Scalar>
Scalar penalty_value(const ModelSpec<Scalar>& model, const ObjectiveConfig<Scalar>& config)
{
    Scalar total = Scalar(0);
    for (const auto& flow : model.flows) {
        const auto* pen = config.penalty_for(flow.kind);
        if (!pen || pen->kind == PenaltyKind::None) continue;
        pen->validate(flow);
        Scalar value = penalty_function(pen->kind, flow.coefficients, pen->alpha, pen->weights ? &*pen->weights : nullptr);
        if (flow.has_intercept && config.penalize_intercepts) {
            Vector<Scalar> icpt(1);
            icpt << flow.intercept;
            const Vector<Scalar> unit = Vector<Scalar>::Ones(1);
            value += penalty_function(pen->kind, icpt, pen->alpha, &unit);
        }
        total += pen->lambda * value;
    }
    return total;
}

template <class Scalar>
Scalar objective_total(const ModelSpec<Scalar>& model, const Dataset<Scalar>& data,
                       const ObjectiveConfig<Scalar>& config)
{
    return nll(model, data, config) + penalty_value(model, config);
}

/// Same penalty kind and strength on every flow of `model`.
template <class Scalar>
ObjectiveConfig<Scalar> uniform_penalty(const ModelSpec<Scalar>& model, PenaltyKind kind, Scalar lambda,
                                        Scalar alpha = Scalar(0.5))
{
    ObjectiveConfig<Scalar> config;
    for (const auto& flow : model.flows) config.penalties[flow.kind] = PenaltySpec<Scalar>{kind, lambda, alpha, std::nullopt};
    return config;
}

} // namespace rbc
