#pragma once

// Proximal gradient descent (forward-backward splitting) with backtracking on the
// composite objective, plus trace-based convergence diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "rbc/objective.hpp"

namespace rbc {

template <class Scalar>
struct OptimOptions {
    int max_iters = 500;
    /// Relative objective change |F_t - F_{t-1}| / max(1, |F_{t-1}|) declaring convergence.
    Scalar tol = Scalar(1e-8);
    Scalar init_step = Scalar(1);
    Scalar shrink = Scalar(0.5);
    Scalar sufficient_decrease_c = Scalar(0.5);
    /// Starting point; zeros when empty. Must share the template's flow structure.
    std::optional<ModelSpec<Scalar>> init_coefficients;

    void validate() const
    {
        if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
        if (!(tol > Scalar(0))) throw ConfigError("tol must be positive");
        if (!(init_step > Scalar(0))) throw ConfigError("init_step must be positive");
        if (!(shrink > Scalar(0) && shrink < Scalar(1))) throw ConfigError("shrink must lie in (0,1)");
        if (!(sufficient_decrease_c > Scalar(0) && sufficient_decrease_c < Scalar(1)))
            throw ConfigError("sufficient_decrease_c must lie in (0,1)");
    }
};

enum class FitStatus { Converged, MaxIterations, LineSearchFailed };

inline std::string_view to_string(FitStatus status)
{
    switch (status) {
        case FitStatus::Converged: return "converged";
        case FitStatus::MaxIterations: return "max_iterations";
        case FitStatus::LineSearchFailed: return "line_search_failed";
    }
    return "?";
}

template <class Scalar>
struct FitResult {
    ModelSpec<Scalar> model;
    /// F at the starting point followed by F at every accepted iterate.
    std::vector<Scalar> objective_trace;
    bool converged = false;
    FitStatus status = FitStatus::MaxIterations;
    int iterations = 0;
    /// Observations whose composed probability hit the clamp at the final iterate.
    Eigen::Index clamp_count = 0;
    Scalar final_step = Scalar(0);
    /// Every flow carries a ridge-type term with positive weight.
    bool strongly_convex_penalty = false;

    Scalar final_objective() const { return objective_trace.back(); }

    bool trace_is_monotone(Scalar slack = Scalar(1e-12)) const
    {
        for (std::size_t t = 1; t < objective_trace.size(); ++t)
            if (objective_trace[t] > objective_trace[t - 1] + slack) return false;
        return true;
    }
};

/// Process-wide tally of fits and of traces that failed the descent check.
struct FitStatistics {
    long fits = 0;
    long monotonicity_violations = 0;
};

namespace detail {
inline std::atomic<long>& fit_counter()
{
    static std::atomic<long> counter{0};
    return counter;
}
inline std::atomic<long>& violation_counter()
{
    static std::atomic<long> counter{0};
    return counter;
}
} // namespace detail

inline FitStatistics fit_statistics()
{
    return {detail::fit_counter().load(), detail::violation_counter().load()};
}

template <class Scalar>
bool is_strongly_convex(const ModelSpec<Scalar>& model, const ObjectiveConfig<Scalar>& config)
{
    if (model.flows.empty()) return false;
    for (const auto& flow : model.flows) {
        const auto* pen = config.penalty_for(flow.kind);
        if (!pen || !(pen->lambda > Scalar(0))) return false;
        const bool ridge_part = pen->kind == PenaltyKind::L2
                                || (pen->kind == PenaltyKind::ElasticNet && pen->alpha < Scalar(1));
        if (!ridge_part) return false;
    }
    return true;
}

/// Minimizes mean NLL + sum_k lambda_k psi_k(beta_k) over the coefficients of `structure`.
template <class Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& data, const ModelSpec<Scalar>& structure,
                      const ObjectiveConfig<Scalar>& config, const OptimOptions<Scalar>& options = {})
{
    options.validate();
    const CompositeObjective<Scalar> objective(structure, data, config);

    Vector<Scalar> theta = options.init_coefficients ? objective.pack(*options.init_coefficients)
                                                     : Vector<Scalar>::Zero(objective.size());
    Vector<Scalar> grad;
    auto smooth = objective.smooth(theta, &grad);
    Scalar F = smooth.value + objective.penalty(theta);
    if (!theta.allFinite() || !std::isfinite(static_cast<double>(F)) || !grad.allFinite())
        throw OptimizationError("objective is not finite at the initial coefficients");

    FitResult<Scalar> result;
    result.strongly_convex_penalty = is_strongly_convex(structure, config);
    result.objective_trace.push_back(F);

    constexpr Scalar min_step = Scalar(1e-16);
    Scalar accepted_step = options.init_step;
    for (int t = 1; t <= options.max_iters; ++t) {
        Scalar step = t == 1 ? options.init_step : std::min(options.init_step, Scalar(2) * accepted_step);
        Vector<Scalar> candidate;
        Scalar F_candidate = Scalar(0);
        bool accepted = false;
        while (step >= min_step) {
            candidate = objective.prox_step(theta - step * grad, step);
            F_candidate = objective.total(candidate);
            const Scalar decrease = options.sufficient_decrease_c / (Scalar(2) * step) * (candidate - theta).squaredNorm();
            if (std::isfinite(static_cast<double>(F_candidate)) && F_candidate <= F - decrease) {
                accepted = true;
                break;
            }
            step *= options.shrink;
        }
        if (!accepted) {
            result.status = FitStatus::LineSearchFailed;
            result.final_step = step;
            break;
        }

        accepted_step = step;
        const Scalar change = std::abs(F - F_candidate) / std::max(Scalar(1), std::abs(F));
        theta = std::move(candidate);
        F = F_candidate;
        result.objective_trace.push_back(F);
        result.iterations = t;
        result.final_step = step;
        if (change < options.tol) {
            result.status = FitStatus::Converged;
            break;
        }
        smooth = objective.smooth(theta, &grad);
    }

    result.converged = result.status == FitStatus::Converged;
    result.model = objective.unpack(theta);
    result.clamp_count = objective.smooth(theta).clamped;

    detail::fit_counter().fetch_add(1);
    if (!result.trace_is_monotone()) detail::violation_counter().fetch_add(1);
    return result;
}

template <class Scalar>
struct ConvergenceReport {
    /// t * (F_t - F_final) for t = 1 .. T-1.
    std::vector<Scalar> scaled_gaps;
    Scalar scaled_gap_median = Scalar(0);
    Scalar scaled_gap_tail_max = Scalar(0);
    /// Tail of the scaled gaps stays within 10x the median: consistent with an O(1/t) rate.
    bool sublinear_bounded = false;
    /// Least-squares slope of log(F_t - F_final + 1e-15) against t.
    Scalar log_gap_slope = Scalar(0);
    bool strongly_convex = false;
    /// Negative slope, reported only for strongly convex penalties.
    bool linear_rate = false;
};

template <class Scalar>
ConvergenceReport<Scalar> convergence_report(const FitResult<Scalar>& result)
{
    if (result.iterations < 10 || result.objective_trace.size() < 11)
        throw DiagnosticUnavailable("convergence diagnostics need at least 10 iterations, got "
                                    + std::to_string(result.iterations));
    const auto& trace = result.objective_trace;
    const std::size_t T = trace.size() - 1;
    const Scalar final_value = trace.back();

    ConvergenceReport<Scalar> report;
    report.strongly_convex = result.strongly_convex_penalty;
    for (std::size_t t = 1; t < T; ++t)
        report.scaled_gaps.push_back(static_cast<Scalar>(t) * std::max(Scalar(0), trace[t] - final_value));

    std::vector<Scalar> sorted = report.scaled_gaps;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    report.scaled_gap_median = sorted[sorted.size() / 2];
    const auto tail_begin = report.scaled_gaps.begin() + static_cast<std::ptrdiff_t>(report.scaled_gaps.size() / 2);
    report.scaled_gap_tail_max = *std::max_element(tail_begin, report.scaled_gaps.end());
    report.sublinear_bounded = report.scaled_gap_tail_max <= Scalar(10) * report.scaled_gap_median + Scalar(1e-12);

    // Slope over t = 0 .. T-1; the last entry has zero gap by construction.
    Scalar mean_t = 0, mean_l = 0;
    std::vector<Scalar> logs(T);
    for (std::size_t t = 0; t < T; ++t) {
        logs[t] = std::log(std::max(Scalar(0), trace[t] - final_value) + Scalar(1e-15));
        mean_t += static_cast<Scalar>(t);
        mean_l += logs[t];
    }
    mean_t /= static_cast<Scalar>(T);
    mean_l /= static_cast<Scalar>(T);
    Scalar sxy = 0, sxx = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const Scalar dt = static_cast<Scalar>(t) - mean_t;
        sxy += dt * (logs[t] - mean_l);
        sxx += dt * dt;
    }
    report.log_gap_slope = sxy / sxx;
    report.linear_rate = report.strongly_convex && report.log_gap_slope < Scalar(0);
    return report;
}

/// Subgradient optimality residuals of a fitted model.
template <class Scalar>
struct OptimalityResiduals {
    /// max over non-zero L1-type coordinates of |grad_j + lambda w_j sign(beta_j) + smooth penalty terms|.
    Scalar active = Scalar(0);
    /// max over zero L1-type coordinates of |grad_j| - lambda w_j (1 + 1e-6); <= 0 means satisfied.
    Scalar inactive_excess = -std::numeric_limits<Scalar>::infinity();
    /// max over unpenalized or purely smooth coordinates of |d F / d beta_j|.
    Scalar smooth = Scalar(0);
};

template <class Scalar>
OptimalityResiduals<Scalar> optimality_residuals(const Dataset<Scalar>& data, const ModelSpec<Scalar>& model,
                                                 const ObjectiveConfig<Scalar>& config)
{
    const CompositeObjective<Scalar> objective(model, data, config);
    const Vector<Scalar> theta = objective.pack(model);
    Vector<Scalar> grad;
    objective.smooth(theta, &grad);
    const auto coords = objective.coordinates();

    OptimalityResiduals<Scalar> out;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const auto& c = coords[static_cast<std::size_t>(j)];
        Scalar l1 = Scalar(0), l2 = Scalar(0);
        switch (c.penalty) {
            case PenaltyKind::None: break;
            case PenaltyKind::L1: l1 = c.lambda; break;
            case PenaltyKind::AdaptiveL1: l1 = c.lambda * c.l1_weight; break;
            case PenaltyKind::L2: l2 = c.lambda; break;
            case PenaltyKind::ElasticNet:
                l1 = c.lambda * c.alpha;
                l2 = c.lambda * (Scalar(1) - c.alpha);
                break;
        }
        const Scalar g = grad[j] + Scalar(2) * l2 * theta[j];
        if (l1 == Scalar(0)) {
            out.smooth = std::max(out.smooth, std::abs(g));
        } else if (theta[j] == Scalar(0)) {
            out.inactive_excess = std::max(out.inactive_excess, std::abs(g) - l1 * Scalar(1 + 1e-6));
        } else {
            out.active = std::max(out.active, std::abs(g + l1 * (theta[j] > 0 ? Scalar(1) : Scalar(-1))));
        }
    }
    return out;
}

} // namespace rbc
