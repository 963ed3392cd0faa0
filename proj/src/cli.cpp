#include "rbc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "rbc/svg.hpp"

namespace rbc {

namespace {

const std::vector<std::string> default_odds{"age", "sex", "smoking", "lead", "bmi"};

bool is_none(const std::vector<std::string>& list)
{
    return list.empty() || (list.size() == 1 && (list[0] == "none" || list[0].empty()));
}

std::vector<std::string> flow_list(const std::optional<std::vector<std::string>>& list)
{
    if (!list || is_none(*list)) return {};
    return *list;
}

bool has_columns(const std::vector<std::string>& names, const std::vector<std::string>& wanted)
{
    return std::all_of(wanted.begin(), wanted.end(), [&](const std::string& w) {
        return std::find(names.begin(), names.end(), w) != names.end();
    });
}

bool explicit_formula(const RunConfig& c) { return c.odds || c.risk1 || c.risk0; }

std::string path_in(const RunConfig& c, const std::string& file)
{
    return (std::filesystem::path(c.outdir) / file).string();
}

std::string join(const std::vector<std::string>& items, const std::string& sep = "+")
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
    return out;
}

std::string flow_formula(const FlowSpec<double>& flow, const std::vector<std::string>& names)
{
    std::vector<std::string> terms{flow.has_intercept ? "1" : "0"};
    for (auto idx : flow.covariate_indices) terms.push_back(names[static_cast<std::size_t>(idx)]);
    return std::string(to_string(flow.kind)) + "(" + join(terms, " + ") + ")";
}

std::map<FlowKind, PenaltyKind> penalty_kinds(const RunConfig& c)
{
    return {{FlowKind::ScOdds, parse_penalty_kind(c.penalty_odds)},
            {FlowKind::ScRisk1, parse_penalty_kind(c.penalty_risk1)},
            {FlowKind::ScRisk0, parse_penalty_kind(c.penalty_risk0)}};
}

OptimOptions<double> optim_options(const RunConfig& c)
{
    OptimOptions<double> o;
    o.max_iters = c.max_iters;
    o.tol = c.tol;
    o.validate();
    return o;
}

std::uint64_t to_seed(long v) { return static_cast<std::uint64_t>(v); }

struct Prepared {
    LoadedData loaded;
    ModelSpec<double> structure;
};

Prepared prepare(const RunConfig& c, bool standardize_default)
{
    if (c.input.empty()) throw ConfigError("--input is required");
    if (c.outcome.empty()) throw ConfigError("--outcome is required");
    const CsvTable table = read_csv_file(c.input);
    table.column(c.outcome);
    LoadOptions lo;
    lo.outcome = c.outcome;
    lo.covariates = formula_columns(c, table.header);
    lo.standardize = c.standardize.value_or(standardize_default);
    Prepared p;
    p.loaded = load_csv(table, lo);
    p.structure = resolve_formula(c, p.loaded.data.feature_names);
    return p;
}

/// Penalty configuration with lambda left at 0, pilot weights filled for adaptive flows.
ObjectiveConfig<double> base_config(const RunConfig& c, const Dataset<double>& data, const ModelSpec<double>& structure,
                                    const OptimOptions<double>& options)
{
    ObjectiveConfig<double> config;
    const auto kinds = penalty_kinds(c);
    std::optional<std::map<FlowKind, Vector<double>>> weights;
    for (const auto& flow : structure.flows) {
        PenaltySpec<double> pen;
        pen.kind = kinds.at(flow.kind);
        pen.alpha = c.alpha;
        if (pen.kind == PenaltyKind::None) continue;
        if (pen.kind == PenaltyKind::AdaptiveL1) {
            if (!weights) {
                ObjectiveConfig<double> pilot;
                for (const auto& f : structure.flows) pilot.penalties[f.kind] = {PenaltyKind::L2, 0.01, 0.0, {}};
                weights = adaptive_weights(fit(data, structure, pilot, options));
            }
            pen.weights = weights->at(flow.kind);
        }
        config.penalties[flow.kind] = pen;
    }
    config.validate();
    return config;
}

std::set<FlowKind> penalized_flows(const ObjectiveConfig<double>& config)
{
    std::set<FlowKind> out;
    for (const auto& [kind, pen] : config.penalties)
        if (pen.kind != PenaltyKind::None) out.insert(kind);
    return out;
}

std::map<FlowKind, double> fixed_lambdas(const RunConfig& c, const std::set<FlowKind>& flows)
{
    std::vector<double> values;
    std::stringstream ss(c.lambda);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--lambda must be 'cv', one number or three comma-separated numbers, got '" + c.lambda + "'");
        }
    }
    if (values.size() != 1 && values.size() != 3)
        throw ConfigError("--lambda must be 'cv', one number or three comma-separated numbers, got '" + c.lambda + "'");
    std::map<FlowKind, double> out;
    for (auto kind : flows) out[kind] = values.size() == 1 ? values[0] : values[flow_slot(kind)];
    for (const auto& [kind, v] : out)
        if (!(v >= 0.0)) throw ConfigError("lambda must be non-negative");
    return out;
}

CvConfig cv_config(const RunConfig& c)
{
    CvConfig cv;
    cv.folds = c.folds;
    cv.seed = c.seed;
    return cv;
}

std::string cv_curve_csv(const CvResult& r)
{
    std::ostringstream os;
    write_csv_row(os, {"sweep", "flow", "lambda", "cv_mean_heldout_nll"});
    for (const auto& pt : r.cv_curve)
        write_csv_row(os, {std::to_string(pt.sweep), std::string(to_string(pt.flow)), format_double(pt.lambda),
                           format_double(pt.deviance)});
    return os.str();
}

std::string cv_curve_svg(const CvResult& r)
{
    static const std::map<FlowKind, std::string> colors{
        {FlowKind::ScOdds, "#1f77b4"}, {FlowKind::ScRisk1, "#d62728"}, {FlowKind::ScRisk0, "#2ca02c"}};
    svg::LineChart chart;
    chart.title = "Cross-validated held-out NLL";
    chart.x_label = "lambda";
    chart.y_label = "mean held-out NLL";
    chart.log_x = true;
    for (auto kind : canonical_flow_order) {
        // Last sweep that scanned this flow.
        int sweep = -1;
        for (const auto& pt : r.cv_curve)
            if (pt.flow == kind) sweep = std::max(sweep, pt.sweep);
        if (sweep < 0) continue;
        std::map<double, double> points;
        for (const auto& pt : r.cv_curve)
            if (pt.flow == kind && pt.sweep == sweep) points[pt.lambda] = pt.deviance;
        svg::Series s;
        s.label = std::string(to_string(kind));
        s.color = colors.at(kind);
        for (const auto& [x, y] : points) {
            s.x.push_back(x);
            s.y.push_back(y);
        }
        chart.series.push_back(std::move(s));
    }
    return svg::render(chart);
}

void add_scales(Metadata& meta, const LoadedData& loaded)
{
    std::vector<std::string> std_cols;
    for (const auto& s : loaded.scales)
        if (s.standardized)
            std_cols.push_back(s.name + ":" + format_double(s.mean) + ":" + format_double(s.sd));
    meta.emplace_back("standardized", std_cols.empty() ? "none" : join(std_cols, ";"));
}

std::string lambda_text(const std::map<FlowKind, double>& lambdas, FlowKind kind)
{
    auto it = lambdas.find(kind);
    return it == lambdas.end() ? "0" : format_double(it->second);
}

std::vector<double> demo_gamma_grid()
{
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(i / 10.0);
    return g;
}

} // namespace

std::vector<std::string> formula_columns(const RunConfig& config, const std::vector<std::string>& header)
{
    std::vector<std::string> cols;
    auto add = [&](const std::vector<std::string>& list) {
        for (const auto& name : list)
            if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
    };
    if (explicit_formula(config)) {
        add(flow_list(config.odds));
        add(flow_list(config.risk1));
        add(flow_list(config.risk0));
    } else if (has_columns(header, default_odds)) {
        add(default_odds);
    } else {
        for (const auto& h : header)
            if (h != config.outcome) cols.push_back(h);
    }
    for (const auto& name : cols)
        if (std::find(header.begin(), header.end(), name) == header.end())
            throw ConfigError("column '" + name + "' is not in the input header");
    return cols;
}

ModelSpec<double> resolve_formula(const RunConfig& config, const std::vector<std::string>& covariates)
{
    auto indices = [&](const std::vector<std::string>& names) {
        std::vector<Eigen::Index> idx;
        for (const auto& name : names) {
            auto it = std::find(covariates.begin(), covariates.end(), name);
            if (it == covariates.end()) throw ConfigError("column '" + name + "' is not a loaded covariate");
            idx.push_back(static_cast<Eigen::Index>(it - covariates.begin()));
        }
        return idx;
    };
    if (config.intercepts.size() != 3) throw ConfigError("--intercepts needs three flags (odds, risk1, risk0)");
    const std::array<bool, 3> icpt{config.intercepts[0], config.intercepts[1], config.intercepts[2]};

    ModelSpec<double> model;
    if (explicit_formula(config)) {
        model = canonical_model(indices(flow_list(config.odds)), indices(flow_list(config.risk1)),
                                indices(flow_list(config.risk0)), icpt, config.p0);
    } else if (has_columns(covariates, default_odds)) {
        model = canonical_model(indices(default_odds), indices({"lead"}), indices({"lead"}), icpt, config.p0);
    } else {
        model = canonical_model(column_range(static_cast<Eigen::Index>(covariates.size())), {}, {}, icpt, config.p0);
    }
    std::erase_if(model.flows, [](const FlowSpec<double>& f) { return !f.has_intercept && f.covariate_indices.empty(); });
    if (model.flows.empty()) throw ConfigError("the formula has no terms");
    model.validate();
    return model;
}

LabbeCurve labbe_curve(const ModelSpec<double>& model, Eigen::Index covariate, std::string name, double delta, int points)
{
    if (points < 2) throw ConfigError("a L'Abbe curve needs at least two points");
    std::vector<std::pair<FlowKind, double>> shifts;
    for (const auto& flow : model.flows)
        for (std::size_t j = 0; j < flow.covariate_indices.size(); ++j)
            if (flow.covariate_indices[j] == covariate)
                shifts.emplace_back(flow.kind, flow.coefficients[static_cast<Eigen::Index>(j)] * delta);
    if (shifts.empty()) throw ConfigError("exposure '" + name + "' does not enter any flow");

    LabbeCurve curve;
    curve.covariate = std::move(name);
    curve.delta = delta;
    for (int i = 0; i < points; ++i) {
        const double pc = (1.0 + 98.0 * static_cast<double>(i) / static_cast<double>(points - 1)) / 100.0;
        double pt = pc;
        for (const auto& [kind, v] : shifts) pt = apply_flow(pt, kind, v);
        curve.p_control.push_back(pc);
        curve.p_treated.push_back(std::clamp(pt, 0.0, 1.0));
    }
    return curve;
}

std::vector<NonidentRow> nonident_table(double theta, double p_star, const std::vector<double>& gammas, double lambda)
{
    Dataset<double> data;
    data.X = Matrix<double>::Ones(1, 1);
    data.y = Vector<double>::Ones(1);
    std::vector<NonidentRow> rows;
    for (const auto& pt : nonident_family(theta, gammas, p_star)) {
        auto model = canonical_model({}, {}, {}, {true, true, true});
        model.flows[0].intercept = std::log(theta);
        model.flows[1].intercept = std::log(pt.gamma);
        model.flows[2].intercept = std::log(pt.delta);
        NonidentRow row;
        row.gamma = pt.gamma;
        row.delta = pt.delta;
        row.nll = nll(model, data, ObjectiveConfig<double>{});
        row.penalty = std::abs(std::log(pt.gamma)) + std::abs(std::log(pt.delta));
        row.penalized = row.nll + lambda * row.penalty;
        rows.push_back(row);
    }
    return rows;
}

CommandOutput cmd_fit(const RunConfig& c)
{
    CommandOutput out;
    const auto options = optim_options(c);
    const Prepared prep = prepare(c, true);
    const auto& data = prep.loaded.data;
    const auto& names = data.feature_names;
    ObjectiveConfig<double> config = base_config(c, data, prep.structure, options);
    const auto flows = penalized_flows(config);

    std::map<FlowKind, double> lambdas;
    std::optional<CvResult> tuning;
    if (!flows.empty()) {
        if (c.lambda == "cv") {
            tuning = tune_lambda(data, prep.structure, config, options, cv_config(c), flows);
            lambdas = tuning->best_lambdas;
        } else {
            lambdas = fixed_lambdas(c, flows);
        }
    }
    config = with_lambdas(config, lambdas);
    const FitResult<double> result = fit(data, prep.structure, config, options);

    write_coefficients_file(path_in(c, "coefficients.csv"), result.model, names);
    out.files.push_back(path_in(c, "coefficients.csv"));
    std::ostringstream trace;
    write_trace(trace, result.objective_trace);
    write_text_file(path_in(c, "trace.csv"), trace.str());
    out.files.push_back(path_in(c, "trace.csv"));
    if (tuning) {
        write_text_file(path_in(c, "cv_curve.csv"), cv_curve_csv(*tuning));
        out.files.push_back(path_in(c, "cv_curve.csv"));
    }

    Metadata meta{{"command", "fit"},
                  {"input", c.input},
                  {"n", std::to_string(data.n())},
                  {"outcome", c.outcome},
                  {"p0", format_double(prep.structure.p0)}};
    for (const auto& flow : prep.structure.flows) {
        const std::string key(to_string(flow.kind));
        const auto* pen = config.penalty_for(flow.kind);
        meta.emplace_back("formula_" + key, flow_formula(flow, names));
        meta.emplace_back("penalty_" + key, std::string(to_string(pen ? pen->kind : PenaltyKind::None)));
        meta.emplace_back("lambda_" + key, lambda_text(lambdas, flow.kind));
    }
    meta.emplace_back("lambda_source", flows.empty() ? "none" : (tuning ? "cv" : "fixed"));
    meta.emplace_back("alpha", format_double(c.alpha));
    meta.emplace_back("folds", std::to_string(c.folds));
    meta.emplace_back("seed", std::to_string(c.seed));
    add_scales(meta, prep.loaded);
    meta.emplace_back("status", std::string(to_string(result.status)));
    meta.emplace_back("converged", result.converged ? "true" : "false");
    meta.emplace_back("iterations", std::to_string(result.iterations));
    meta.emplace_back("clamp_count", std::to_string(result.clamp_count));
    meta.emplace_back("final_objective", format_double(result.final_objective()));
    meta.emplace_back("final_step", format_double(result.final_step));
    if (result.status == FitStatus::MaxIterations)
        out.warnings.push_back("optimizer stopped after " + std::to_string(result.iterations)
                               + " iterations without meeting the tolerance");
    if (result.clamp_count > 0)
        out.warnings.push_back(std::to_string(result.clamp_count)
                               + " observations hit the probability clamp; coefficients may be unbounded");
    if (result.status == FitStatus::LineSearchFailed) {
        out.warnings.push_back("line search failed: step size underflow after " + std::to_string(result.iterations)
                               + " iterations");
        out.exit_code = ExitOptimization;
    }
    for (const auto& w : out.warnings) meta.emplace_back("warning", w);
    std::ostringstream os;
    write_metadata(os, meta);
    write_text_file(path_in(c, "metadata.txt"), os.str());
    out.files.push_back(path_in(c, "metadata.txt"));
    return out;
}

CommandOutput cmd_cv(const RunConfig& c)
{
    CommandOutput out;
    const auto options = optim_options(c);
    const Prepared prep = prepare(c, true);
    const auto& data = prep.loaded.data;
    const ObjectiveConfig<double> config = base_config(c, data, prep.structure, options);
    const auto flows = penalized_flows(config);
    if (flows.empty()) throw ConfigError("cv needs at least one penalized flow (--penalty-odds/--penalty-risk1/--penalty-risk0)");
    const CvResult r = tune_lambda(data, prep.structure, config, options, cv_config(c), flows);

    write_text_file(path_in(c, "cv_curve.csv"), cv_curve_csv(r));
    write_text_file(path_in(c, "cv_curve.svg"), cv_curve_svg(r));
    Metadata meta{{"command", "cv"}, {"input", c.input}, {"n", std::to_string(data.n())}, {"outcome", c.outcome}};
    for (auto kind : flows) meta.emplace_back("lambda_" + std::string(to_string(kind)), lambda_text(r.best_lambdas, kind));
    meta.emplace_back("best_cv_mean_heldout_nll", format_double(r.best_deviance));
    meta.emplace_back("sweeps", std::to_string(r.sweeps));
    meta.emplace_back("folds", std::to_string(c.folds));
    meta.emplace_back("seed", std::to_string(c.seed));
    add_scales(meta, prep.loaded);
    std::ostringstream os;
    write_metadata(os, meta);
    write_text_file(path_in(c, "metadata.txt"), os.str());
    out.files = {path_in(c, "cv_curve.csv"), path_in(c, "cv_curve.svg"), path_in(c, "metadata.txt")};
    return out;
}

CommandOutput cmd_labbe(const RunConfig& c)
{
    CommandOutput out;
    const Prepared prep = prepare(c, false);
    const auto& data = prep.loaded.data;
    const Eigen::Index idx = feature_index(data, c.exposure);

    ModelSpec<double> model;
    if (!c.coefficients.empty()) {
        model = load_coefficients_file(c.coefficients, data.feature_names);
    } else {
        const auto options = optim_options(c);
        ObjectiveConfig<double> config = base_config(c, data, prep.structure, options);
        const auto flows = penalized_flows(config);
        std::map<FlowKind, double> lambdas;
        if (!flows.empty())
            lambdas = c.lambda == "cv" ? tune_lambda(data, prep.structure, config, options, cv_config(c), flows).best_lambdas
                                       : fixed_lambdas(c, flows);
        const auto result = fit(data, prep.structure, with_lambdas(config, lambdas), options);
        if (result.status == FitStatus::LineSearchFailed) throw OptimizationError("line search failed while fitting");
        model = result.model;
    }
    // Default exposure change: from 0 to the sample mean.
    const double delta = c.delta.value_or(data.X.col(idx).mean());
    const LabbeCurve curve = labbe_curve(model, idx, c.exposure, delta);

    std::ostringstream csv;
    write_csv_row(csv, {"p_control", "p_treated"});
    for (std::size_t i = 0; i < curve.p_control.size(); ++i)
        write_csv_row(csv, {format_double(curve.p_control[i]), format_double(curve.p_treated[i])});
    write_text_file(path_in(c, "labbe.csv"), csv.str());

    svg::LineChart chart;
    chart.title = "L'Abbe plot: " + curve.covariate + " shifted by " + format_fixed(delta, 3);
    chart.x_label = "P(outcome) at reference exposure";
    chart.y_label = "P(outcome) at shifted exposure";
    chart.x_range = svg::Range{0.0, 1.0};
    chart.y_range = svg::Range{0.0, 1.0};
    chart.series.push_back({"identity", {0.0, 1.0}, {0.0, 1.0}, "#7f7f7f", true});
    chart.series.push_back({"fitted", curve.p_control, curve.p_treated, "#d62728", false});
    write_text_file(path_in(c, "labbe.svg"), svg::render(chart));
    out.files = {path_in(c, "labbe.csv"), path_in(c, "labbe.svg")};
    return out;
}

CommandOutput cmd_simulate(const RunConfig& c)
{
    CommandOutput out;
    if (c.n < 10) throw ConfigError("--n must be at least 10");
    if (c.reps < 1) throw ConfigError("--reps must be positive");
    const auto all = preset_scenarios(c.n, c.seed);
    std::vector<ScenarioConfig> chosen;
    const bool everything = std::find(c.presets.begin(), c.presets.end(), "all") != c.presets.end();
    for (const auto& s : all)
        if (everything || std::find(c.presets.begin(), c.presets.end(), s.name) != c.presets.end()) chosen.push_back(s);
    for (const auto& name : c.presets)
        if (name != "all" && std::none_of(all.begin(), all.end(), [&](const auto& s) { return s.name == name; }))
            throw ConfigError("unknown preset '" + name + "'");

    std::vector<ScenarioResult> results;
    for (auto s : chosen) {
        s.replications = c.reps;
        s.threads = c.threads;
        s.compute_deviance = c.deviance;
        s.optim = optim_options(c);
        s.cv.folds = c.folds;
        if (!c.methods.empty()) {
            s.methods.clear();
            for (const auto& m : c.methods) s.methods.push_back(parse_method(m));
        }
        s.validate();
        results.push_back(run_scenario(s));
        std::ostringstream os;
        write_scenario_csv(os, results.back());
        const std::string file = path_in(c, "scenario_" + s.name + ".csv");
        write_text_file(file, os.str());
        out.files.push_back(file);
    }

    std::ostringstream summary;
    write_summary_csv(summary, results);
    write_text_file(path_in(c, "summary.csv"), summary.str());
    out.files.push_back(path_in(c, "summary.csv"));

    const std::vector<std::pair<std::string, std::string>> metrics{
        {"estimation_error", "estimation error"}, {"tpr", "true positive rate"}, {"fpr", "false positive rate"}};
    for (const auto& [metric, label] : metrics) {
        std::ostringstream q;
        write_quantiles_csv(q, results, metric);
        write_text_file(path_in(c, "quantiles_" + metric + ".csv"), q.str());
        out.files.push_back(path_in(c, "quantiles_" + metric + ".csv"));
        for (const auto& r : results) {
            svg::BoxChart chart;
            chart.title = r.config.name + " (n=" + std::to_string(r.config.n) + "): " + label;
            chart.y_label = label;
            for (const auto& m : r.methods) {
                std::vector<double> values;
                for (const auto& rep : m.reps) {
                    if (!rep.converged) continue;
                    values.push_back(metric == "tpr" ? rep.tpr : metric == "fpr" ? rep.fpr : rep.estimation_error);
                }
                if (!values.empty()) chart.boxes.push_back(svg::box_stats(m.summary.method, values));
            }
            const std::string file = path_in(c, "boxplot_" + metric + "_" + r.config.name + ".svg");
            write_text_file(file, svg::render(chart));
            out.files.push_back(file);
        }
    }
    for (const auto& r : results)
        for (const auto& m : r.methods)
            if (m.summary.failed_reps > 0)
                out.warnings.push_back(r.config.name + "/" + m.summary.method + ": " + std::to_string(m.summary.failed_reps)
                                       + " replications did not converge and were excluded");
    return out;
}

CommandOutput cmd_demo_nonident(const RunConfig& c)
{
    CommandOutput out;
    const auto rows = nonident_table(c.theta, c.p_star, demo_gamma_grid(), c.demo_lambda);
    std::ostringstream csv;
    write_csv_row(csv, {"gamma", "delta", "nll", "penalty", "penalized_objective"});
    for (const auto& r : rows)
        write_csv_row(csv, {format_double(r.gamma), format_double(r.delta), format_double(r.nll), format_double(r.penalty),
                            format_double(r.penalized)});
    write_text_file(path_in(c, "demo_nonident.csv"), csv.str());

    svg::LineChart chart;
    chart.title = "Likelihood and penalized objective along the flat ridge";
    chart.x_label = "risk ratio gamma";
    chart.y_label = "objective";
    svg::Series flat{"NLL", {}, {}, "#1f77b4", true};
    svg::Series pen{"NLL + lambda (|log gamma| + |log delta|)", {}, {}, "#d62728", false};
    for (const auto& r : rows) {
        flat.x.push_back(r.gamma);
        flat.y.push_back(r.nll);
        pen.x.push_back(r.gamma);
        pen.y.push_back(r.penalized);
    }
    chart.series = {flat, pen};
    write_text_file(path_in(c, "demo_nonident.svg"), svg::render(chart));
    out.files = {path_in(c, "demo_nonident.csv"), path_in(c, "demo_nonident.svg")};
    return out;
}

namespace {

void add_model_options(CLI::App* sub, RunConfig& c, std::string& intercepts)
{
    sub->add_option("--input", c.input, "CSV file with a header row (complete cases)");
    sub->add_option("--outcome", c.outcome, "Binary outcome column (0/1, yes/no, true/false)");
    sub->add_option("--odds", c.odds, "Covariates of the odds flow, comma separated, or 'none'")->delimiter(',');
    sub->add_option("--risk1", c.risk1, "Covariates of the risk flow, comma separated, or 'none'")->delimiter(',');
    sub->add_option("--risk0", c.risk0, "Covariates of the survival flow, comma separated, or 'none'")->delimiter(',');
    sub->add_option("--intercepts", intercepts, "Intercept flags for odds,risk1,risk0")->capture_default_str();
    sub->add_option("--p0", c.p0, "Baseline probability the flows act on")->capture_default_str();
    sub->add_option("--penalty-odds", c.penalty_odds, "none|l1|l2|enet|adaptive")->capture_default_str();
    sub->add_option("--penalty-risk1", c.penalty_risk1, "none|l1|l2|enet|adaptive")->capture_default_str();
    sub->add_option("--penalty-risk0", c.penalty_risk0, "none|l1|l2|enet|adaptive")->capture_default_str();
    sub->add_option("--lambda", c.lambda, "'cv', one value, or odds,risk1,risk0 values")->capture_default_str();
    sub->add_option("--alpha", c.alpha, "Elastic-net L1 share")->capture_default_str();
    sub->add_option("--folds", c.folds, "Cross-validation folds")->capture_default_str();
    sub->add_option("--standardize", c.standardize,
                    "z-score non-binary covariates (default: on for fit and cv, off for labbe)");
    sub->add_option("--max-iters", c.max_iters, "Optimizer iteration limit")->capture_default_str();
    sub->add_option("--tol", c.tol, "Relative objective change tolerance")->capture_default_str();
}

std::vector<bool> parse_flags(const std::string& text)
{
    std::vector<bool> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "1" || item == "true" || item == "yes") out.push_back(true);
        else if (item == "0" || item == "false" || item == "no") out.push_back(false);
        else throw ConfigError("--intercepts expects three of 1/0, got '" + text + "'");
    }
    if (out.size() != 3) throw ConfigError("--intercepts expects three of 1/0, got '" + text + "'");
    return out;
}

/// Splices key=value lines of a --config file in as flags after the subcommand name;
/// flags already on the command line win.
std::vector<std::string> with_config_file(const std::vector<std::string>& args)
{
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty() || args.empty()) return args;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");

    auto given = [&](const std::string& key) {
        return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == "--" + key || a.rfind("--" + key + "=", 0) == 0;
        });
    };
    std::vector<std::string> injected;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
        auto strip = [](std::string v) {
            const auto a = v.find_first_not_of(" \t\r"), b = v.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
        };
        std::string key = strip(line.substr(0, eq)), value = strip(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        if (key.empty() || key == "config")
            throw ConfigError(path + ":" + std::to_string(line_no) + ": invalid key");
        if (given(key)) continue;
        injected.push_back("--" + key);
        injected.push_back(value);
    }
    std::vector<std::string> out{args.front()};
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Penalized regression by composition for binary outcomes.\n\n"
                 "Text cells are coded female/yes/true = 1 and male/no/false = 0.\n"
                 "Exit codes: 0 success, 1 usage, 2 data, 3 optimization failure.",
                 "rbc"};
    app.require_subcommand(1);
    RunConfig c;
    std::string intercepts = "1,0,0";
    long seed = 1;
    std::string config_path;

    auto* fit_cmd = app.add_subcommand("fit", "Fit a penalized three-flow model to a CSV file");
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate per-flow penalty strengths");
    auto* labbe_cmd = app.add_subcommand("labbe", "L'Abbe curve for a shift in one exposure covariate");
    auto* sim_cmd = app.add_subcommand("simulate", "Run the variable-selection simulation presets");
    auto* demo_cmd = app.add_subcommand("demo-nonident", "Tabulate the flat likelihood ridge and its penalized slice");

    for (auto* sub : {fit_cmd, cv_cmd, labbe_cmd, sim_cmd, demo_cmd}) {
        sub->add_option("--outdir", c.outdir, "Output directory")->capture_default_str();
        sub->add_option("--config", config_path, "key=value file (# comments); command-line flags take precedence");
    }
    for (auto* sub : {fit_cmd, cv_cmd, labbe_cmd}) {
        add_model_options(sub, c, intercepts);
        sub->add_option("--seed", seed, "Fold-assignment seed")->envname("RBC_SEED")->capture_default_str();
    }
    labbe_cmd->add_option("--coefficients", c.coefficients, "coefficients.csv from fit (raw covariate scale)");
    labbe_cmd->add_option("--exposure", c.exposure, "Exposure covariate")->capture_default_str();
    labbe_cmd->add_option("--delta", c.delta, "Exposure change (default: 0 to the sample mean)");

    sim_cmd->add_option("--n", c.n, "Sample size")->capture_default_str();
    sim_cmd->add_option("--preset", c.presets,
                        "all, or any of reference,p5,p20,rho0,rho0.8,snr0.5,snr2,worst")
        ->delimiter(',');
    sim_cmd->add_option("--reps", c.reps, "Replications per scenario")->capture_default_str();
    sim_cmd->add_option("--methods", c.methods, "Unreg,Lasso,Ridge,EN,AdaLasso (default: the first four)")->delimiter(',');
    sim_cmd->add_option("--threads", c.threads, "Worker threads for replications")->capture_default_str();
    sim_cmd->add_option("--folds", c.folds, "Cross-validation folds")->capture_default_str();
    sim_cmd->add_option("--deviance", c.deviance, "Compute cross-validated deviance per replication")->capture_default_str();
    sim_cmd->add_option("--max-iters", c.max_iters, "Optimizer iteration limit")->capture_default_str();
    sim_cmd->add_option("--tol", c.tol, "Relative objective change tolerance")->capture_default_str();
    long sim_seed = 2024;
    sim_cmd->add_option("--seed", sim_seed, "Base seed of the scenario presets")->envname("RBC_SEED")->capture_default_str();

    demo_cmd->add_option("--theta", c.theta, "Odds multiplier")->capture_default_str();
    demo_cmd->add_option("--p-star", c.p_star, "Probability held fixed along the ridge")->capture_default_str();
    demo_cmd->add_option("--lambda", c.demo_lambda, "Penalty weight")->capture_default_str();

    std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
    try {
        argv = with_config_file(argv);
        std::vector<std::string> rev(argv.rbegin(), argv.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ExitSuccess : ExitUsage;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return ExitUsage;
    }

    try {
        c.intercepts = parse_flags(intercepts);
        CommandOutput result;
        if (*fit_cmd) {
            c.seed = to_seed(seed);
            result = cmd_fit(c);
        } else if (*cv_cmd) {
            c.seed = to_seed(seed);
            result = cmd_cv(c);
        } else if (*labbe_cmd) {
            c.seed = to_seed(seed);
            result = cmd_labbe(c);
        } else if (*sim_cmd) {
            c.seed = to_seed(sim_seed);
            result = cmd_simulate(c);
        } else {
            result = cmd_demo_nonident(c);
        }
        for (const auto& w : result.warnings) err << "warning: " << w << '\n';
        for (const auto& f : result.files) out << f << '\n';
        return result.exit_code;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return ExitData;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << '\n';
        return ExitUsage;
    } catch (const StructuralError& e) {
        err << "usage error: " << e.what() << '\n';
        return ExitUsage;
    } catch (const OptimizationError& e) {
        err << "optimization error: " << e.what() << '\n';
        return ExitOptimization;
    } catch (const TuningError& e) {
        err << "optimization error: " << e.what() << '\n';
        return ExitOptimization;
    } catch (const ScenarioError& e) {
        err << "optimization error: " << e.what() << '\n';
        return ExitOptimization;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return ExitUsage;
    }
}

} // namespace rbc
