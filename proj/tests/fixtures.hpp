#pragma once

// Random datasets shared by the optimizer tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rbc/flow.hpp"

namespace rbc::oracle {

inline Dataset<double> logistic_data(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double scale = 0.8)
{
    std::mt19937_64 rng(seed);
    Dataset<double> data;
    data.X = random_matrix(n, d, rng);
    std::normal_distribution<double> z(0.0, 1.0);
    Vector<double> beta(d);
    for (Eigen::Index j = 0; j < d; ++j) beta[j] = scale * z(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = 0.3 + data.X.row(i).dot(beta);
        data.y[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    return data;
}

/// Outcomes from a three-flow model: odds on every column, risk1 on column 0, risk0 on column 1.
inline Dataset<double> three_flow_data(Eigen::Index n, Eigen::Index d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    Dataset<double> data;
    data.X = random_matrix(n, d, rng);
    auto truth = canonical_model(column_range(d), {0}, {1});
    std::normal_distribution<double> z(0.0, 0.5);
    for (Eigen::Index j = 0; j < d; ++j) truth.flows[0].coefficients[j] = z(rng);
    truth.flows[1].coefficients << 0.3;
    const auto p = compose_probabilities(truth, data.X);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) data.y[i] = u(rng) < std::clamp(p[i], 1e-9, 1 - 1e-9) ? 1.0 : 0.0;
    return data;
}

/// Uniform design on [-1, 1] with a mild three-flow truth; fitted probabilities usually stay inside (0, 1).
inline Dataset<double> bounded_three_flow_data(Eigen::Index n, Eigen::Index d, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 0.5);
    Dataset<double> data;
    data.X.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) data.X(i, j) = u(rng);
    auto truth = canonical_model(column_range(d), {0}, {1});
    truth.flows[0].intercept = -0.5;
    for (Eigen::Index j = 0; j < d; ++j) truth.flows[0].coefficients[j] = z(rng);
    truth.flows[1].coefficients << 0.3;
    truth.flows[2].coefficients << -0.2;
    const auto p = compose_probabilities(truth, data.X);
    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) data.y[i] = u01(rng) < p[i] ? 1.0 : 0.0;
    return data;
}

/// Distance of the fitted probabilities from the ends of the unit interval.
inline double boundary_margin(const ModelSpec<double>& model, const Matrix<double>& X)
{
    const auto p = compose_probabilities(model, X);
    return std::min(p.minCoeff(), 1.0 - p.maxCoeff());
}

} // namespace rbc::oracle
