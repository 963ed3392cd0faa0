#include "rbc/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <thread>

namespace rbc {

std::string_view to_string(Method method)
{
    switch (method) {
        case Method::Unregularized: return "Unreg";
        case Method::Lasso: return "Lasso";
        case Method::Ridge: return "Ridge";
        case Method::ElasticNet: return "EN";
        case Method::AdaptiveLasso: return "AdaLasso";
    }
    return "?";
}

Method parse_method(std::string_view name)
{
    if (name == "Unreg" || name == "unreg" || name == "unregularized") return Method::Unregularized;
    if (name == "Lasso" || name == "lasso") return Method::Lasso;
    if (name == "Ridge" || name == "ridge") return Method::Ridge;
    if (name == "EN" || name == "en" || name == "enet" || name == "elasticnet") return Method::ElasticNet;
    if (name == "AdaLasso" || name == "adalasso" || name == "adaptive") return Method::AdaptiveLasso;
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const
{
    if (n < 20) throw ConfigError("scenario '" + name + "': n must be at least 20");
    if (p < 2) throw ConfigError("scenario '" + name + "': p must be at least 2");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("scenario '" + name + "': rho must lie in [0,1)");
    if (!(snr > 0.0)) throw ConfigError("scenario '" + name + "': snr must be positive");
    if (replications < 1) throw ConfigError("scenario '" + name + "': need at least one replication");
    if (methods.empty()) throw ConfigError("scenario '" + name + "': no methods requested");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    cv.validate(n);
    optim.validate();
}

Vector<double> TruthSpec::stacked() const
{
    Vector<double> out(beta_odds.size() + beta_risk1.size() + beta_risk0.size());
    out << beta_odds, beta_risk1, beta_risk0;
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Matrix<double> gen_design(Eigen::Index n, Eigen::Index p, double rho, std::uint64_t seed)
{
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("gen_design: rho must lie in [0,1)");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double innovation = std::sqrt(1.0 - rho * rho);
    Matrix<double> X(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = normal(rng);
        for (Eigen::Index j = 1; j < p; ++j) X(i, j) = rho * X(i, j - 1) + innovation * normal(rng);
    }
    return X;
}

Matrix<double> ar1_covariance(Eigen::Index p, double rho)
{
    Matrix<double> sigma(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return sigma;
}

TruthSpec gen_truth(Eigen::Index p, double snr, double rho, std::uint64_t seed)
{
    if (p < 1) throw DomainError("gen_truth: p must be positive");
    if (!(snr > 0.0)) throw DomainError("gen_truth: snr must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    TruthSpec truth;
    truth.beta_odds.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) truth.beta_odds[j] = normal(rng);
    const double variance = truth.beta_odds.dot(ar1_covariance(p, rho) * truth.beta_odds);
    truth.beta_odds *= std::sqrt(snr / variance);
    truth.beta_risk1 = Vector<double>::Zero(p);
    truth.beta_risk1[0] = 0.5;
    truth.beta_risk0 = Vector<double>::Zero(p);
    return truth;
}

ModelSpec<double> truth_model(const TruthSpec& truth)
{
    const Eigen::Index p = truth.beta_odds.size();
    ModelSpec<double> model = canonical_model(column_range(p), column_range(p), column_range(p));
    model.flows[0].coefficients = truth.beta_odds;
    model.flows[1].coefficients = truth.beta_risk1;
    model.flows[2].coefficients = truth.beta_risk0;
    return model;
}

Vector<double> gen_response(const Matrix<double>& X, const TruthSpec& truth, std::uint64_t seed, double clamp_epsilon)
{
    if (truth.beta_odds.size() != X.cols() || truth.beta_risk1.size() != X.cols() || truth.beta_risk0.size() != X.cols())
        throw StructuralError("truth does not match the design width");
    const Vector<double> prob = compose_probabilities(truth_model(truth), X);
    std::mt19937_64 rng(seed);
    Vector<double> y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double pi = std::clamp(prob[i], clamp_epsilon, 1.0 - clamp_epsilon);
        // 53-bit uniform in [0,1) taken directly from the engine.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        y[i] = u < pi ? 1.0 : 0.0;
    }
    return y;
}

ModelSpec<double> simulation_structure(Eigen::Index p)
{
    return canonical_model(column_range(p), column_range(p), column_range(p));
}

RepMetrics compute_metrics(const ModelSpec<double>& fitted, const TruthSpec& truth, double threshold)
{
    const auto* odds = fitted.find(FlowKind::ScOdds);
    const auto* risk1 = fitted.find(FlowKind::ScRisk1);
    const auto* risk0 = fitted.find(FlowKind::ScRisk0);
    const Eigen::Index p = truth.beta_odds.size();
    if (!odds || !risk1 || !risk0 || odds->coefficients.size() != p || risk1->coefficients.size() != p
        || risk0->coefficients.size() != p)
        throw StructuralError("fitted model does not carry p coefficients in each of the three flows");

    Vector<double> estimate(3 * p);
    estimate << odds->coefficients, risk1->coefficients, risk0->coefficients;

    RepMetrics m;
    m.estimation_error = (estimate - truth.stacked()).norm();
    m.tpr = std::abs(risk1->coefficients[0]) > threshold ? 1.0 : 0.0;
    int false_pos = 0;
    for (Eigen::Index j = 1; j < p; ++j) false_pos += std::abs(risk1->coefficients[j]) > threshold;
    for (Eigen::Index j = 0; j < p; ++j) false_pos += std::abs(risk0->coefficients[j]) > threshold;
    m.fpr = static_cast<double>(false_pos) / static_cast<double>(2 * p - 1);
    m.nonzero_count = static_cast<double>(false_pos) + m.tpr;
    m.converged = true;
    return m;
}

ObjectiveConfig<double> method_config(Method method, const ModelSpec<double>& structure,
                                      const std::map<FlowKind, double>& lambdas, double alpha,
                                      const std::map<FlowKind, Vector<double>>* weights)
{
    ObjectiveConfig<double> config;
    if (method == Method::Unregularized) return config;
    for (const auto& flow : structure.flows) {
        PenaltySpec<double> pen;
        auto it = lambdas.find(flow.kind);
        pen.lambda = it == lambdas.end() ? 0.0 : it->second;
        pen.alpha = alpha;
        switch (method) {
            case Method::Lasso: pen.kind = PenaltyKind::L1; break;
            case Method::Ridge: pen.kind = PenaltyKind::L2; break;
            case Method::ElasticNet: pen.kind = PenaltyKind::ElasticNet; break;
            case Method::AdaptiveLasso: {
                pen.kind = PenaltyKind::AdaptiveL1;
                if (!weights || !weights->count(flow.kind))
                    throw ConfigError("adaptive lasso needs pilot weights for every flow");
                pen.weights = weights->at(flow.kind);
                break;
            }
            case Method::Unregularized: break;
        }
        config.penalties[flow.kind] = pen;
    }
    return config;
}

namespace {

struct Replicate {
    Dataset<double> data;
    TruthSpec truth;
    std::optional<FitResult<double>> warm;
    std::map<FlowKind, Vector<double>> pilot_weights;
    std::uint64_t seed;
};

Replicate make_replicate(const ScenarioConfig& config, int rep)
{
    Replicate r;
    r.seed = config.base_seed * 10000 + static_cast<std::uint64_t>(rep);
    r.data.X = gen_design(config.n, config.p, config.rho, derive_seed(r.seed, 1));
    r.truth = gen_truth(config.p, config.snr, config.rho, derive_seed(r.seed, 2));
    r.data.y = gen_response(r.data.X, r.truth, derive_seed(r.seed, 3));

    const auto structure = simulation_structure(config.p);
    const bool adaptive = std::find(config.methods.begin(), config.methods.end(), Method::AdaptiveLasso) != config.methods.end();
    if (config.multistart || adaptive) {
        std::map<FlowKind, double> warm_lambdas;
        for (auto kind : canonical_flow_order) warm_lambdas[kind] = config.warm_ridge_lambda;
        r.warm = fit(r.data, structure, method_config(Method::Ridge, structure, warm_lambdas, 0.0), config.optim);
        if (adaptive) r.pilot_weights = adaptive_weights(*r.warm, config.adaptive_exponent);
    }
    return r;
}

bool is_tuned(Method method) { return method != Method::Unregularized; }

std::map<FlowKind, double> tune_method(const ScenarioConfig& config, Method method, const Replicate& r,
                                       std::optional<CvResult>& record)
{
    if (!is_tuned(method)) return {};
    const auto structure = simulation_structure(config.p);
    std::map<FlowKind, double> zero;
    const auto base = method_config(method, structure, zero, config.elastic_net_alpha, &r.pilot_weights);
    CvConfig cv = config.cv;
    cv.seed = derive_seed(r.seed, 4);
    std::set<FlowKind> flows(canonical_flow_order.begin(), canonical_flow_order.end());
    record = tune_lambda(r.data, structure, base, config.optim, cv, flows);
    return record->best_lambdas;
}

RepMetrics evaluate_method(const ScenarioConfig& config, Method method, const std::map<FlowKind, double>& lambdas,
                           const Replicate& r, int rep)
{
    const auto structure = simulation_structure(config.p);
    const auto objective = method_config(method, structure, lambdas, config.elastic_net_alpha, &r.pilot_weights);

    FitResult<double> best = fit(r.data, structure, objective, config.optim);
    if (config.multistart && r.warm) {
        OptimOptions<double> warm_options = config.optim;
        warm_options.init_coefficients = r.warm->model;
        FitResult<double> other = fit(r.data, structure, objective, warm_options);
        const bool prefer_other = (other.converged && !best.converged)
                                  || (other.converged == best.converged && other.final_objective() < best.final_objective());
        if (prefer_other) best = std::move(other);
    }

    RepMetrics m = compute_metrics(best, r.truth, config.selection_threshold);
    m.rep = rep;
    m.deviance = std::numeric_limits<double>::quiet_NaN();
    if (config.compute_deviance) {
        const int folds = config.cv.folds;
        m.deviance = cv_deviance(r.data, structure, objective, config.optim, {},
                                 kfold_split(config.n, folds, derive_seed(r.seed, 5)), folds);
    }
    return m;
}

} // namespace

ScenarioResult run_scenario(const ScenarioConfig& config)
{
    config.validate();
    ScenarioResult result;
    result.config = config;
    for (auto method : config.methods) result.methods.push_back({method, {}, {}, {}, {}});
    for (auto& outcome : result.methods) outcome.reps.resize(static_cast<std::size_t>(config.replications));

    auto run_rep = [&](int rep, bool tune) {
        const Replicate r = make_replicate(config, rep);
        for (auto& outcome : result.methods) {
            if (tune) outcome.lambdas = tune_method(config, outcome.method, r, outcome.tuning);
            outcome.reps[static_cast<std::size_t>(rep - 1)] = evaluate_method(config, outcome.method, outcome.lambdas, r, rep);
        }
    };

    run_rep(1, true);
    if (!config.freeze_lambda || config.threads == 1) {
        for (int rep = 2; rep <= config.replications; ++rep) run_rep(rep, !config.freeze_lambda);
    } else {
        // Each worker owns a disjoint set of replication slots.
        std::vector<std::thread> workers;
        const int nthreads = std::min(config.threads, std::max(1, config.replications - 1));
        for (int w = 0; w < nthreads; ++w)
            workers.emplace_back([&, w] {
                for (int rep = 2 + w; rep <= config.replications; rep += nthreads) {
                    const Replicate r = make_replicate(config, rep);
                    for (auto& outcome : result.methods)
                        outcome.reps[static_cast<std::size_t>(rep - 1)] =
                            evaluate_method(config, outcome.method, outcome.lambdas, r, rep);
                }
            });
        for (auto& t : workers) t.join();
    }

    std::vector<std::string> failed_methods;
    for (auto& outcome : result.methods) {
        auto& s = outcome.summary;
        s.method = std::string(to_string(outcome.method));
        int used = 0;
        for (const auto& m : outcome.reps) {
            if (!m.converged) {
                ++s.failed_reps;
                continue;
            }
            ++used;
            s.estimation_error += m.estimation_error;
            s.tpr += m.tpr;
            s.fpr += m.fpr;
            s.deviance += m.deviance;
            s.nonzero_count += m.nonzero_count;
        }
        if (used == 0) {
            failed_methods.push_back(s.method);
            continue;
        }
        s.estimation_error /= used;
        s.tpr /= used;
        s.fpr /= used;
        s.deviance /= used;
        s.nonzero_count /= used;
    }
    if (!failed_methods.empty()) {
        std::string names;
        for (const auto& m : failed_methods) names += (names.empty() ? "" : ", ") + m;
        throw ScenarioError("scenario '" + config.name + "': every replication failed to converge for " + names);
    }
    return result;
}

std::vector<ScenarioConfig> preset_scenarios(Eigen::Index n, std::uint64_t seed)
{
    struct Factors {
        const char* name;
        Eigen::Index p;
        double rho;
        double snr;
    };
    static constexpr Factors presets[] = {
        {"reference", 10, 0.5, 1.0}, {"p5", 5, 0.5, 1.0},    {"p20", 20, 0.5, 1.0},  {"rho0", 10, 0.0, 1.0},
        {"rho0.8", 10, 0.8, 1.0},    {"snr0.5", 10, 0.5, 0.5}, {"snr2", 10, 0.5, 2.0}, {"worst", 20, 0.8, 0.5},
    };
    const bool canonical = n == 100 || n == 500 || n == 1000;
    std::vector<ScenarioConfig> out;
    std::uint64_t index = 0;
    for (const auto& f : presets) {
        ScenarioConfig c;
        c.name = f.name;
        c.n = n;
        c.p = f.p;
        c.rho = f.rho;
        c.snr = f.snr;
        c.canonical_n = canonical;
        c.base_seed = seed * 100000 + static_cast<std::uint64_t>(n) * 10 + index++;
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace rbc
