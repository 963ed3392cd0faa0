#include "rbc/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rbc {

std::vector<double> log_spaced_grid(double lo, double hi, int count)
{
    if (!(lo > 0.0 && hi > lo) || count < 2)
        throw ConfigError("log-spaced grid needs 0 < lo < hi and at least two points");
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < count; ++i)
        grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

std::vector<double> default_lambda_grid() { return log_spaced_grid(1e-4, 1e2, 20); }

void CvConfig::validate(Eigen::Index n) const
{
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (folds > n)
        throw ConfigError("cannot split " + std::to_string(n) + " observations into " + std::to_string(folds) + " folds");
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0)) throw ConfigError("lambda grid values must be positive");
        if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1]))
            throw ConfigError("lambda grid must be strictly increasing");
    }
    if (max_sweeps < 1) throw ConfigError("max_sweeps must be at least 1");
    if (!(tie_tolerance >= 0.0)) throw ConfigError("tie_tolerance must be non-negative");
}

std::vector<int> kfold_split(Eigen::Index n, int folds, std::uint64_t seed)
{
    if (folds < 2) throw std::invalid_argument("kfold_split: need at least 2 folds");
    if (folds > n)
        throw std::invalid_argument("kfold_split: " + std::to_string(folds) + " folds for "
                                    + std::to_string(n) + " observations");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    // Fisher-Yates on the raw engine output so the permutation does not depend on the
    // standard library's distribution implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<int> assignment(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        assignment[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return assignment;
}

ObjectiveConfig<double> with_lambdas(ObjectiveConfig<double> config, const std::map<FlowKind, double>& lambdas)
{
    for (const auto& [kind, lambda] : lambdas) {
        auto it = config.penalties.find(kind);
        if (it == config.penalties.end())
            throw ConfigError("no penalty configured for flow " + std::string(to_string(kind)));
        it->second.lambda = lambda;
    }
    return config;
}

double cv_deviance(const Dataset<double>& data, const ModelSpec<double>& structure,
                   const ObjectiveConfig<double>& config, const OptimOptions<double>& options,
                   const std::map<FlowKind, double>& lambdas, const std::vector<int>& folds, int fold_count)
{
    if (static_cast<Eigen::Index>(folds.size()) != data.n())
        throw ConfigError("fold assignment length does not match the data");
    const ObjectiveConfig<double> tuned = with_lambdas(config, lambdas);
    ObjectiveConfig<double> unpenalized;
    unpenalized.clamp_epsilon = config.clamp_epsilon;

    double total = 0.0;
    for (int f = 0; f < fold_count; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < folds.size(); ++i)
            (folds[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        if (test.empty() || train.empty())
            throw TuningError("fold " + std::to_string(f) + " is empty");
        const Dataset<double> train_data = data.subset(train);
        const Dataset<double> test_data = data.subset(test);
        FitResult<double> result;
        try {
            result = fit(train_data, structure, tuned, options);
        } catch (const OptimizationError& e) {
            throw TuningError("fit on fold " + std::to_string(f) + " failed: " + e.what());
        }
        total += nll(result.model, test_data, unpenalized);
    }
    return total / fold_count;
}

double cv_deviance(const Dataset<double>& data, const ModelSpec<double>& structure,
                   const ObjectiveConfig<double>& config, const OptimOptions<double>& options,
                   const std::map<FlowKind, double>& lambdas, const CvConfig& cv)
{
    cv.validate(data.n());
    return cv_deviance(data, structure, config, options, lambdas, kfold_split(data.n(), cv.folds, cv.seed), cv.folds);
}

CvResult tune_lambda(const Dataset<double>& data, const ModelSpec<double>& structure,
                     const ObjectiveConfig<double>& config, const OptimOptions<double>& options,
                     const CvConfig& cv, const std::set<FlowKind>& penalized_flows)
{
    if (penalized_flows.empty()) throw ConfigError("tune_lambda needs at least one penalized flow");
    cv.validate(data.n());
    for (auto kind : penalized_flows)
        if (!config.penalty_for(kind))
            throw ConfigError("no penalty configured for flow " + std::string(to_string(kind)));

    CvResult result;
    result.fold_assignments = kfold_split(data.n(), cv.folds, cv.seed);

    const auto& grid = cv.lambda_grid;
    std::map<FlowKind, std::size_t> position;
    for (auto kind : penalized_flows) position[kind] = grid.size() / 2;

    std::map<std::vector<std::size_t>, double> cache;
    auto evaluate = [&](const std::map<FlowKind, std::size_t>& pos) {
        std::vector<std::size_t> key;
        std::map<FlowKind, double> lambdas;
        for (const auto& [kind, idx] : pos) {
            key.push_back(idx);
            lambdas[kind] = grid[idx];
        }
        if (auto it = cache.find(key); it != cache.end()) return it->second;
        const double dev = cv_deviance(data, structure, config, options, lambdas, result.fold_assignments, cv.folds);
        cache.emplace(std::move(key), dev);
        return dev;
    };

    double best = evaluate(position);
    for (int sweep = 1; sweep <= cv.max_sweeps; ++sweep) {
        result.sweeps = sweep;
        bool changed = false;
        for (auto kind : canonical_flow_order) {
            if (!penalized_flows.count(kind)) continue;
            std::size_t best_idx = position[kind];
            double best_dev = best;
            for (std::size_t g = 0; g < grid.size(); ++g) {
                auto trial = position;
                trial[kind] = g;
                const double dev = evaluate(trial);
                result.cv_curve.push_back({sweep, kind, grid[g], dev});
                const double tol = cv.tie_tolerance * std::max(1.0, std::abs(best_dev));
                if (dev < best_dev - tol || (std::abs(dev - best_dev) <= tol && g > best_idx)) {
                    best_dev = dev;
                    best_idx = g;
                }
            }
            if (best_idx != position[kind]) changed = true;
            position[kind] = best_idx;
            best = best_dev;
        }
        if (!changed) break;
    }

    for (const auto& [kind, idx] : position) result.best_lambdas[kind] = grid[idx];
    result.best_deviance = best;
    return result;
}

std::map<FlowKind, Vector<double>> adaptive_weights(const ModelSpec<double>& initial, double exponent, double floor)
{
    if (!(exponent > 0.0)) throw ConfigError("adaptive exponent must be positive");
    if (!(floor > 0.0)) throw ConfigError("adaptive weight floor must be positive");
    std::map<FlowKind, Vector<double>> out;
    for (const auto& flow : initial.flows)
        out[flow.kind] = flow.coefficients.unaryExpr(
            [&](double b) { return 1.0 / std::pow(std::max(std::abs(b), floor), exponent); });
    return out;
}

} // namespace rbc
