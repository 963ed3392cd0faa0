#pragma once

// Scenario generator, selection metrics and the replication runner for the
// variable-selection study.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rbc/tuning.hpp"

namespace rbc {

enum class Method { Unregularized, Lasso, Ridge, ElasticNet, AdaptiveLasso };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// Methods reported in the study tables.
inline const std::vector<Method>& default_methods()
{
    static const std::vector<Method> methods{Method::Unregularized, Method::Lasso, Method::Ridge, Method::ElasticNet};
    return methods;
}

struct ScenarioConfig {
    std::string name = "reference";
    Eigen::Index n = 500;
    Eigen::Index p = 10;
    double rho = 0.5;
    double snr = 1.0;
    int replications = 30;
    std::uint64_t base_seed = 1;
    std::vector<Method> methods = default_methods();
    /// n is one of 100, 500, 1000.
    bool canonical_n = true;

    // Harness knobs.
    CvConfig cv{};
    /// Tune on the first replication and reuse the lambdas for the rest.
    bool freeze_lambda = true;
    /// Also fit from a ridge-warm start and keep the lower objective.
    bool multistart = true;
    /// Ridge strength of the warm-start fit and of the adaptive-lasso pilot fit.
    double warm_ridge_lambda = 0.01;
    double elastic_net_alpha = 0.5;
    double adaptive_exponent = 1.0;
    double selection_threshold = 1e-6;
    /// Skip the per-replication cross-validated deviance (reported as NaN).
    bool compute_deviance = true;
    OptimOptions<double> optim{};
    /// Worker threads for replications; results do not depend on it.
    int threads = 1;

    void validate() const;
};

struct TruthSpec {
    Vector<double> beta_odds;
    Vector<double> beta_risk1;
    Vector<double> beta_risk0;

    /// Concatenated covariate coefficients [odds, risk1, risk0].
    Vector<double> stacked() const;
};

struct RepMetrics {
    int rep = 0;
    double estimation_error = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double deviance = 0.0;
    double nonzero_count = 0.0;
    bool converged = false;
};

struct MetricsSummary {
    std::string method;
    double estimation_error = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double deviance = 0.0;
    double nonzero_count = 0.0;
    int failed_reps = 0;
};

struct MethodOutcome {
    Method method;
    MetricsSummary summary;
    std::vector<RepMetrics> reps;
    /// Lambdas used for every replication (empty for the unregularized fit).
    std::map<FlowKind, double> lambdas;
    /// CV search on the first replication, when the method is tuned.
    std::optional<CvResult> tuning;
};

struct ScenarioResult {
    ScenarioConfig config;
    std::vector<MethodOutcome> methods;
};

/// Rows are iid N(0, Sigma) with Sigma_ij = rho^|i-j|, via the AR(1) recursion.
Matrix<double> gen_design(Eigen::Index n, Eigen::Index p, double rho, std::uint64_t seed);

/// AR(1) covariance matrix.
Matrix<double> ar1_covariance(Eigen::Index p, double rho);

/// Odds coefficients scaled so beta' Sigma beta = snr under the AR(1) covariance with
/// correlation rho; risk-ratio effect 0.5 on the first covariate, no survival-ratio effect.
TruthSpec gen_truth(Eigen::Index p, double snr, double rho, std::uint64_t seed);

/// Data-generating model: odds intercept 0, no risk intercepts, every flow on every covariate.
ModelSpec<double> truth_model(const TruthSpec& truth);

Vector<double> gen_response(const Matrix<double>& X, const TruthSpec& truth, std::uint64_t seed,
                            double clamp_epsilon = 1e-9);

/// Fitted structure used by the harness: odds flow with intercept, risk flows without.
ModelSpec<double> simulation_structure(Eigen::Index p);

RepMetrics compute_metrics(const ModelSpec<double>& fitted, const TruthSpec& truth, double threshold = 1e-6);

inline RepMetrics compute_metrics(const FitResult<double>& fitted, const TruthSpec& truth, double threshold = 1e-6)
{
    RepMetrics m = compute_metrics(fitted.model, truth, threshold);
    m.converged = fitted.converged;
    return m;
}

/// Penalty configuration of a method; flows missing from `lambdas` get lambda 0.
ObjectiveConfig<double> method_config(Method method, const ModelSpec<double>& structure,
                                      const std::map<FlowKind, double>& lambdas, double alpha,
                                      const std::map<FlowKind, Vector<double>>* weights = nullptr);

/// Independent sub-stream seed for one replication.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

ScenarioResult run_scenario(const ScenarioConfig& config);

/// Reference, p=5, p=20, rho=0, rho=0.8, SNR=0.5, SNR=2 and the worst case.
std::vector<ScenarioConfig> preset_scenarios(Eigen::Index n, std::uint64_t seed = 2024);

} // namespace rbc
