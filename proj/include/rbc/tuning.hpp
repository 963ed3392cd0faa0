#pragma once

// K-fold cross-validation of per-flow penalty strengths, coordinate-wise lambda search and
// adaptive-lasso weights.

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "rbc/optimizer.hpp"

namespace rbc {

/// `count` log-spaced values from `lo` to `hi` inclusive.
std::vector<double> log_spaced_grid(double lo, double hi, int count);

/// 20 log-spaced values in [1e-4, 1e2].
std::vector<double> default_lambda_grid();

struct CvConfig {
    int folds = 5;
    std::vector<double> lambda_grid = default_lambda_grid();
    std::uint64_t seed = 1;
    int max_sweeps = 3;
    /// Deviances within this relative distance count as tied.
    double tie_tolerance = 1e-6;

    void validate(Eigen::Index n) const;
};

struct CvCurvePoint {
    int sweep;
    FlowKind flow;
    double lambda;
    double deviance;
};

struct CvResult {
    std::map<FlowKind, double> best_lambdas;
    double best_deviance = 0.0;
    /// Every (flow, lambda) evaluated during the search, in evaluation order.
    std::vector<CvCurvePoint> cv_curve;
    std::vector<int> fold_assignments;
    int sweeps = 0;
};

/// Shuffled assignment of n items to folds 0..folds-1; fold sizes differ by at most one.
std::vector<int> kfold_split(Eigen::Index n, int folds, std::uint64_t seed);

/// Copy of `config` with the listed per-flow lambdas substituted.
ObjectiveConfig<double> with_lambdas(ObjectiveConfig<double> config, const std::map<FlowKind, double>& lambdas);

/// Mean held-out NLL across folds (half the mean deviance per observation).
double cv_deviance(const Dataset<double>& data, const ModelSpec<double>& structure,
                   const ObjectiveConfig<double>& config, const OptimOptions<double>& options,
                   const std::map<FlowKind, double>& lambdas, const CvConfig& cv);

/// Same, with a precomputed fold assignment.
double cv_deviance(const Dataset<double>& data, const ModelSpec<double>& structure,
                   const ObjectiveConfig<double>& config, const OptimOptions<double>& options,
                   const std::map<FlowKind, double>& lambdas, const std::vector<int>& folds, int fold_count);

/// Coordinate descent over per-flow lambdas: each sweep scans the grid for one flow at a
/// time (canonical order) holding the others fixed. Ties go to the larger lambda.
CvResult tune_lambda(const Dataset<double>& data, const ModelSpec<double>& structure,
                     const ObjectiveConfig<double>& config, const OptimOptions<double>& options,
                     const CvConfig& cv, const std::set<FlowKind>& penalized_flows);

/// w_kj = 1 / max(|beta_kj|, floor)^exponent for every flow of the pilot fit.
std::map<FlowKind, Vector<double>> adaptive_weights(const ModelSpec<double>& initial, double exponent = 1.0,
                                                    double floor = 1e-4);

inline std::map<FlowKind, Vector<double>> adaptive_weights(const FitResult<double>& initial, double exponent = 1.0,
                                                           double floor = 1e-4)
{
    return adaptive_weights(initial.model, exponent, floor);
}

} // namespace rbc
