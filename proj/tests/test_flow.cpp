#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rbc/objective.hpp"

using namespace rbc;

namespace {

FlowSpec<double> flow_with(FlowKind kind, double intercept, std::vector<Eigen::Index> idx, std::vector<double> coefs)
{
    auto f = FlowSpec<double>::zeros(kind, intercept != 0.0, std::move(idx));
    f.intercept = intercept;
    for (std::size_t j = 0; j < coefs.size(); ++j) f.coefficients[static_cast<Eigen::Index>(j)] = coefs[j];
    return f;
}

ModelSpec<double> intercept_model(double theta, double gamma, double delta)
{
    auto m = canonical_model({}, {}, {}, {true, true, true});
    m.flows[0].intercept = std::log(theta);
    m.flows[1].intercept = std::log(gamma);
    m.flows[2].intercept = std::log(delta);
    return m;
}

double compose_at(double theta, double gamma, double delta)
{
    Vector<double> x(1);
    x << 0.0;
    return compose_probability(intercept_model(theta, gamma, delta), x);
}

} // namespace

TEST(LinearPredictor, Examples)
{
    Vector<double> x1(1);
    x1 << 3.2;
    EXPECT_DOUBLE_EQ(linear_predictor(flow_with(FlowKind::ScOdds, 0.0, {}, {}), x1), 0.0);
    Vector<double> x2(1);
    x2 << 2.0;
    EXPECT_DOUBLE_EQ(linear_predictor(flow_with(FlowKind::ScOdds, 1.0, {0}, {0.5}), x2), 2.0);
    Vector<double> x3(4);
    x3 << 0, 0, 0, 1.67;
    EXPECT_NEAR(linear_predictor(flow_with(FlowKind::ScRisk1, 0.0, {3}, {0.5}), x3), 0.835, 1e-15);
}

TEST(LinearPredictor, IndexOutOfRangeNamesFlow)
{
    Vector<double> x(2);
    x << 1, 2;
    try {
        linear_predictor(flow_with(FlowKind::ScRisk0, 0.0, {5}, {1.0}), x);
        FAIL();
    } catch (const StructuralError& e) {
        EXPECT_NE(std::string(e.what()).find("ScRisk0"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find('5'), std::string::npos);
    }
}

TEST(ApplyFlow, Examples)
{
    EXPECT_DOUBLE_EQ(apply_flow(0.5, FlowKind::ScOdds, 0.0), 0.5);
    EXPECT_NEAR(apply_flow(0.5, FlowKind::ScRisk1, std::log(2.0)), 1.0, 1e-15);
    EXPECT_NEAR(apply_flow(0.5, FlowKind::ScRisk0, std::log(0.5)), 0.75, 1e-15);
}

TEST(ApplyFlow, RiskFlowsAreNotClamped)
{
    EXPECT_NEAR(apply_flow(0.8, FlowKind::ScRisk1, std::log(2.0)), 1.6, 1e-14);
    EXPECT_NEAR(apply_flow(0.2, FlowKind::ScRisk0, std::log(2.0)), -0.6, 1e-14);
}

TEST(ApplyFlow, IdentityAndAdditivity)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> up(0.0, 1.0), uv(-3.0, 3.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const double p = up(rng), v = uv(rng), w = uv(rng);
        for (auto kind : canonical_flow_order) {
            EXPECT_NEAR(apply_flow(p, kind, 0.0), p, 1e-15);
            const double twice = apply_flow(apply_flow(p, kind, v), kind, w);
            EXPECT_NEAR(twice, apply_flow(p, kind, v + w), 1e-12 * std::max(1.0, std::abs(twice)));
        }
    }
}

TEST(ApplyFlow, OddsMonotoneInV)
{
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) {
        double prev = apply_flow(p, FlowKind::ScOdds, -5.0);
        for (double v = -4.9; v <= 5.0; v += 0.1) {
            const double cur = apply_flow(p, FlowKind::ScOdds, v);
            EXPECT_GT(cur, prev);
            prev = cur;
        }
    }
}

TEST(ApplyFlow, PartialsMatchFiniteDifferences)
{
    const double h = 1e-6;
    for (auto kind : canonical_flow_order)
        for (double p : {0.2, 0.5, 0.7})
            for (double v : {-0.7, 0.0, 0.4}) {
                const auto s = apply_flow_with_partials(p, kind, v);
                EXPECT_DOUBLE_EQ(s.value, apply_flow(p, kind, v));
                EXPECT_NEAR(s.d_dv, (apply_flow(p, kind, v + h) - apply_flow(p, kind, v - h)) / (2 * h), 1e-8);
                EXPECT_NEAR(s.d_dp, (apply_flow(p + h, kind, v) - apply_flow(p - h, kind, v)) / (2 * h), 1e-8);
            }
}

TEST(Compose, Examples)
{
    EXPECT_NEAR(compose_at(1.0, 1.0, 1.0), 0.5, 1e-15);
    EXPECT_NEAR(compose_at(1.0, 2.0, 0.5), 1.0, 1e-15);
    EXPECT_NEAR(compose_at(3.0, 1.0, 1.0), 0.75, 1e-15);
}

TEST(Compose, ClosedFormAgreement)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 1000) {
        const double theta = std::exp(4.0 * u(rng) - 2.0);
        const double q = theta / (1.0 + theta);
        const double gamma = std::exp(4.0 * u(rng) - 2.0);
        const double delta = std::exp(4.0 * u(rng) - 2.0);
        if (gamma * q >= 1.0 || delta * (1.0 - gamma * q) > 1.0) continue;
        EXPECT_NEAR(compose_at(theta, gamma, delta), 1.0 - (1.0 - gamma * q) * delta, 1e-12);
        ++checked;
    }
}

TEST(Compose, VectorizedMatchesRowwise)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 0.5);
    Matrix<double> X(6, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
    auto m = canonical_model({0, 1, 2}, {0}, {2}, {true, true, false});
    m.flows[0].coefficients << 0.3, -0.2, 0.1;
    m.flows[0].intercept = 0.4;
    m.flows[1].coefficients << -0.3;
    m.flows[1].intercept = -0.1;
    m.flows[2].coefficients << 0.2;
    const auto all = compose_probabilities(m, X);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        EXPECT_NEAR(all[i], compose_probability(m, Vector<double>(X.row(i).transpose())), 1e-15);
}

TEST(Compose, NonCanonicalOrderAndP0)
{
    ModelSpec<double> m;
    m.p0 = 0.3;
    m.flows.push_back(flow_with(FlowKind::ScRisk1, 0.2, {}, {}));
    m.flows.push_back(flow_with(FlowKind::ScOdds, -0.5, {}, {}));
    Vector<double> x(1);
    x << 0.0;
    EXPECT_NEAR(compose_probability(m, x), apply_flow(apply_flow(0.3, FlowKind::ScRisk1, 0.2), FlowKind::ScOdds, -0.5),
                1e-15);
}

TEST(NonidentFamily, Examples)
{
    const auto fam = nonident_family(1.0, std::vector<double>{1.0, 0.5, 1.5}, 0.5);
    ASSERT_EQ(fam.size(), 3u);
    EXPECT_NEAR(fam[0].delta, 1.0, 1e-15);
    EXPECT_NEAR(fam[1].delta, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(fam[2].delta, 2.0, 1e-15);
    for (const auto& pt : fam) EXPECT_NEAR(compose_at(1.0, pt.gamma, pt.delta), 0.5, 1e-15);
}

TEST(NonidentFamily, LikelihoodFlatAtOneDesignPoint)
{
    std::vector<double> grid;
    for (int i = 1; i < 40; ++i) grid.push_back(0.1 * i);
    const double theta = 0.7, p_star = 0.35;
    const double q = theta / (1.0 + theta);
    std::vector<double> feasible;
    for (double g : grid)
        if (g * q < 1.0) feasible.push_back(g);
    Dataset<double> data;
    data.X = Matrix<double>::Ones(2, 1);
    data.y.resize(2);
    data.y << 1, 0;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& pt : nonident_family(theta, feasible, p_star)) {
        const double v = nll(intercept_model(theta, pt.gamma, pt.delta), data, ObjectiveConfig<double>{});
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_LT(hi - lo, 1e-10);
}

TEST(NonidentFamily, DomainErrors)
{
    EXPECT_THROW(nonident_family(1.0, std::vector<double>{2.0}, 0.5), DomainError);
    EXPECT_THROW(nonident_family(1.0, std::vector<double>{3.0}, 0.5), DomainError);
    EXPECT_THROW(nonident_family(-1.0, std::vector<double>{0.5}, 0.5), DomainError);
    EXPECT_THROW(nonident_family(1.0, std::vector<double>{0.5}, 1.0), DomainError);
}

TEST(ModelSpec, Validation)
{
    auto m = canonical_model({0}, {0}, {0});
    EXPECT_NO_THROW(m.validate());
    m.p0 = 1.0;
    EXPECT_THROW(m.validate(), StructuralError);
    m.p0 = 0.5;
    m.flows.push_back(m.flows[0]);
    EXPECT_THROW(m.validate(), StructuralError);

    auto f = FlowSpec<double>::zeros(FlowKind::ScOdds, false, {0, 1});
    f.intercept = 0.3;
    EXPECT_THROW(f.validate(), StructuralError);
    f.intercept = 0.0;
    f.coefficients.resize(1);
    EXPECT_THROW(f.validate(), StructuralError);
}

TEST(Dataset, Validation)
{
    Dataset<double> d;
    d.X = Matrix<double>::Zero(3, 2);
    d.y = Vector<double>::Zero(3);
    EXPECT_NO_THROW(d.validate());
    d.y[1] = 2.0;
    EXPECT_THROW(d.validate(), DataError);
    d.y[1] = 1.0;
    d.X(0, 0) = NAN;
    EXPECT_THROW(d.validate(), DataError);
    d.X(0, 0) = 0.0;
    d.feature_names = {"a"};
    EXPECT_THROW(d.validate(), DataError);
}

TEST(FlowKind, Parsing)
{
    EXPECT_EQ(parse_flow_kind("ScOdds"), FlowKind::ScOdds);
    EXPECT_EQ(parse_flow_kind("risk1"), FlowKind::ScRisk1);
    EXPECT_EQ(parse_flow_kind("ScRisk0"), FlowKind::ScRisk0);
    EXPECT_THROW(parse_flow_kind("risk2"), ConfigError);
}
