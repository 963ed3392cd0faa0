#pragma once

// Subcommands of the rbc command-line tool.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rbc/io.hpp"

namespace rbc {

enum ExitCode : int { ExitSuccess = 0, ExitUsage = 1, ExitData = 2, ExitOptimization = 3 };

struct RunConfig {
    std::string input;
    std::string outdir = "rbc_out";
    std::string outcome;

    // Model formula. A flow list holding only "none" is empty; unset lists fall back to
    // the default specification (see resolve_formula).
    std::optional<std::vector<std::string>> odds, risk1, risk0;
    /// Intercept flags for odds, risk1, risk0.
    std::vector<bool> intercepts{true, false, false};
    double p0 = 0.5;

    std::string penalty_odds = "none", penalty_risk1 = "none", penalty_risk0 = "none";
    /// "cv", a single value for every penalized flow, or three comma-separated values.
    std::string lambda = "cv";
    double alpha = 0.5;
    int folds = 5;
    std::uint64_t seed = 1;
    /// Defaults to on for fit and cv, off for labbe.
    std::optional<bool> standardize;
    int max_iters = 500;
    double tol = 1e-8;

    // labbe
    std::string coefficients;
    std::string exposure = "lead";
    std::optional<double> delta;

    // simulate
    long n = 100;
    std::vector<std::string> presets{"all"};
    int reps = 30;
    std::vector<std::string> methods;
    int threads = 1;
    bool deviance = true;

    // demo-nonident
    double theta = 1.0;
    double p_star = 0.5;
    double demo_lambda = 1.0;
};

struct CommandOutput {
    std::vector<std::string> files;
    /// Non-fatal problems, echoed to stderr by the driver.
    std::vector<std::string> warnings;
    int exit_code = ExitSuccess;
};

/// Model structure from the formula fields, resolved against covariate names.
/// Without any flow list, data holding age, sex, smoking, lead and bmi get
/// odds(1 + age + sex + smoking + lead + bmi), risk1(0 + lead), risk0(0 + lead);
/// other data get an odds flow on every covariate.
ModelSpec<double> resolve_formula(const RunConfig& config, const std::vector<std::string>& covariates);

/// Covariate names referenced by the formula, in first-use order.
std::vector<std::string> formula_columns(const RunConfig& config, const std::vector<std::string>& header);

struct LabbeCurve {
    std::string covariate;
    double delta = 0.0;
    std::vector<double> p_control;
    std::vector<double> p_treated;
};

/// Treated probability for each control probability on an evenly spaced grid over
/// [0.01, 0.99]: every flow that uses the covariate is applied with v = coefficient * delta,
/// in model order, and the result clamped to [0, 1].
LabbeCurve labbe_curve(const ModelSpec<double>& model, Eigen::Index covariate, std::string name, double delta,
                       int points = 99);

struct NonidentRow {
    double gamma, delta, nll, penalty, penalized;
};

/// Flat-ridge table at one design point with outcome 1: odds intercept log(theta), risk
/// intercepts log(gamma) and log(delta) along the family reaching p_star.
std::vector<NonidentRow> nonident_table(double theta, double p_star, const std::vector<double>& gammas, double lambda);

CommandOutput cmd_fit(const RunConfig& config);
CommandOutput cmd_cv(const RunConfig& config);
CommandOutput cmd_labbe(const RunConfig& config);
CommandOutput cmd_simulate(const RunConfig& config);
CommandOutput cmd_demo_nonident(const RunConfig& config);

/// Parses arguments (argv[0] is the program name), dispatches and maps errors to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rbc
