#include "rbc/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "rbc/svg.hpp"

namespace rbc {

std::string format_double(double value)
{
    if (std::isnan(value)) return "NA";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, end);
}

std::string format_fixed(double value, int digits)
{
    if (std::isnan(value)) return "NA";
    char buf[128];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, digits);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, end);
}

std::size_t CsvTable::column(std::string_view name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + std::string(name) + "'", -1, std::string(name));
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::string trim(std::string_view s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_record(const std::string& line, long line_no)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw DataError("unterminated quoted field", line_no);
    fields.push_back(trim(cur));
    return fields;
}

std::optional<double> parse_number(std::string_view cell)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

CsvTable read_csv(std::istream& in)
{
    CsvTable table;
    std::string line;
    long line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_record(line, line_no);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw DataError("row has " + std::to_string(fields.size()) + " fields, header has "
                                + std::to_string(table.header.size()),
                            static_cast<long>(table.rows.size() + 1));
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw DataError("input has no header row");
    return table;
}

CsvTable read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const auto& f = fields[i];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            out << f;
        } else {
            out << '"';
            for (char c : f) out << (c == '"' ? "\"\"" : std::string(1, c));
            out << '"';
        }
    }
    out << '\n';
}

std::optional<double> binary_code(std::string_view cell)
{
    const std::string s = lower(cell);
    if (s == "female" || s == "yes" || s == "true") return 1.0;
    if (s == "male" || s == "no" || s == "false") return 0.0;
    return std::nullopt;
}

LoadedData load_csv(const CsvTable& table, const LoadOptions& options)
{
    if (options.outcome.empty()) throw ConfigError("no outcome column given");
    const std::size_t outcome_col = table.column(options.outcome);
    std::vector<std::string> names = options.covariates;
    if (names.empty())
        for (const auto& h : table.header)
            if (h != options.outcome) names.push_back(h);
    if (names.empty()) throw DataError("no covariate columns");
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        if (name == options.outcome) throw ConfigError("outcome column '" + name + "' used as a covariate");
        cols.push_back(table.column(name));
    }
    if (table.rows.empty()) throw DataError("input has no data rows");

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto d = static_cast<Eigen::Index>(cols.size());
    LoadedData out;
    out.data.X.resize(n, d);
    out.data.y.resize(n);
    out.data.feature_names = names;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        const long row_no = static_cast<long>(i + 1);
        const auto& ycell = row[outcome_col];
        std::optional<double> yv = parse_number(ycell);
        if (!yv) yv = binary_code(ycell);
        if (!yv || (*yv != 0.0 && *yv != 1.0))
            throw DataError("row " + std::to_string(row_no) + ", column '" + options.outcome + "': outcome '" + ycell
                                + "' is not binary",
                            row_no, options.outcome);
        out.data.y[i] = *yv;
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto& cell = row[cols[static_cast<std::size_t>(j)]];
            std::optional<double> v = parse_number(cell);
            if (!v) v = binary_code(cell);
            if (!v)
                throw DataError("row " + std::to_string(row_no) + ", column '" + names[static_cast<std::size_t>(j)]
                                    + "': cannot read '" + cell + "' as a number",
                                row_no, names[static_cast<std::size_t>(j)]);
            out.data.X(i, j) = *v;
        }
    }

    for (Eigen::Index j = 0; j < d; ++j) {
        ColumnScale scale;
        scale.name = names[static_cast<std::size_t>(j)];
        auto col = out.data.X.col(j);
        const bool binary = (col.array() == 0.0 || col.array() == 1.0).all();
        scale.mean = col.mean();
        scale.sd = n > 1 ? std::sqrt((col.array() - scale.mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
        if (options.standardize && !binary && scale.sd > 0.0) {
            col = (col.array() - scale.mean) / scale.sd;
            scale.standardized = true;
        }
        out.scales.push_back(scale);
    }
    out.data.validate();
    return out;
}

LoadedData load_csv(const std::string& path, const LoadOptions& options)
{
    return load_csv(read_csv_file(path), options);
}

Eigen::Index feature_index(const Dataset<double>& data, const std::string& name)
{
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), name);
    if (it == data.feature_names.end()) throw ConfigError("unknown covariate '" + name + "'");
    return static_cast<Eigen::Index>(it - data.feature_names.begin());
}

void write_coefficients(std::ostream& out, const ModelSpec<double>& model, const std::vector<std::string>& feature_names)
{
    write_csv_row(out, {"flow", "term", "estimate"});
    for (const auto& flow : model.flows) {
        const std::string kind(to_string(flow.kind));
        write_csv_row(out, {kind, "(Intercept)", format_double(flow.intercept)});
        for (std::size_t j = 0; j < flow.covariate_indices.size(); ++j) {
            const auto idx = static_cast<std::size_t>(flow.covariate_indices[j]);
            const std::string term = idx < feature_names.size() ? feature_names[idx] : "x" + std::to_string(idx);
            write_csv_row(out, {kind, term, format_double(flow.coefficients[static_cast<Eigen::Index>(j)])});
        }
    }
}

void write_coefficients_file(const std::string& path, const ModelSpec<double>& model,
                             const std::vector<std::string>& feature_names)
{
    std::ostringstream os;
    write_coefficients(os, model, feature_names);
    write_text_file(path, os.str());
}

ModelSpec<double> load_coefficients(std::istream& in, const std::vector<std::string>& feature_names,
                                    const std::vector<FlowKind>& intercept_flows)
{
    const CsvTable table = read_csv(in);
    const std::size_t flow_col = table.column("flow"), term_col = table.column("term"), est_col = table.column("estimate");
    ModelSpec<double> model;
    std::vector<std::vector<double>> coefs;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const FlowKind kind = parse_flow_kind(row[flow_col]);
        const auto value = parse_number(row[est_col]);
        if (!value) throw DataError("coefficient '" + row[est_col] + "' is not a number", static_cast<long>(r + 1), "estimate");
        FlowSpec<double>* flow = model.find(kind);
        if (!flow) {
            model.flows.push_back(FlowSpec<double>::zeros(kind, false, {}));
            coefs.emplace_back();
            flow = &model.flows.back();
        }
        auto& values = coefs[static_cast<std::size_t>(flow - model.flows.data())];
        if (row[term_col] == "(Intercept)") {
            flow->intercept = *value;
            flow->has_intercept = *value != 0.0
                                  || std::find(intercept_flows.begin(), intercept_flows.end(), kind) != intercept_flows.end();
            continue;
        }
        auto it = std::find(feature_names.begin(), feature_names.end(), row[term_col]);
        if (it == feature_names.end())
            throw DataError("unknown term '" + row[term_col] + "'", static_cast<long>(r + 1), "term");
        flow->covariate_indices.push_back(static_cast<Eigen::Index>(it - feature_names.begin()));
        values.push_back(*value);
    }
    for (std::size_t k = 0; k < model.flows.size(); ++k)
        model.flows[k].coefficients = Eigen::Map<const Vector<double>>(coefs[k].data(), static_cast<Eigen::Index>(coefs[k].size()));
    model.validate();
    return model;
}

ModelSpec<double> load_coefficients_file(const std::string& path, const std::vector<std::string>& feature_names,
                                         const std::vector<FlowKind>& intercept_flows)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return load_coefficients(in, feature_names, intercept_flows);
}

void write_trace(std::ostream& out, const std::vector<double>& trace)
{
    write_csv_row(out, {"iteration", "objective"});
    for (std::size_t t = 0; t < trace.size(); ++t) write_csv_row(out, {std::to_string(t), format_double(trace[t])});
}

void write_metadata(std::ostream& out, const Metadata& meta)
{
    for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
}

void write_scenario_csv(std::ostream& out, const ScenarioResult& result)
{
    write_csv_row(out, {"scenario", "method", "rep", "estimation_error", "tpr", "fpr", "deviance", "nonzero_count", "converged"});
    for (const auto& method : result.methods)
        for (const auto& m : method.reps)
            write_csv_row(out, {result.config.name, method.summary.method, std::to_string(m.rep),
                                format_double(m.estimation_error), format_double(m.tpr), format_double(m.fpr),
                                format_double(m.deviance), format_double(m.nonzero_count), m.converged ? "1" : "0"});
}

void write_summary_csv(std::ostream& out, const std::vector<ScenarioResult>& results)
{
    write_csv_row(out, {"scenario", "n", "p", "rho", "snr", "method", "estimation_error", "tpr", "fpr",
                        "deviance_mean_heldout_nll", "nonzero_count", "failed_reps", "lambda_odds", "lambda_risk1",
                        "lambda_risk0"});
    for (const auto& r : results)
        for (const auto& m : r.methods) {
            auto lam = [&](FlowKind k) {
                auto it = m.lambdas.find(k);
                return it == m.lambdas.end() ? std::string("0") : format_double(it->second);
            };
            const auto& s = m.summary;
            write_csv_row(out, {r.config.name, std::to_string(r.config.n), std::to_string(r.config.p),
                                format_double(r.config.rho), format_double(r.config.snr), s.method,
                                format_fixed(s.estimation_error, 4), format_fixed(s.tpr, 4), format_fixed(s.fpr, 4),
                                format_fixed(s.deviance, 4), format_fixed(s.nonzero_count, 4),
                                std::to_string(s.failed_reps), lam(FlowKind::ScOdds), lam(FlowKind::ScRisk1),
                                lam(FlowKind::ScRisk0)});
        }
}

void write_quantiles_csv(std::ostream& out, const std::vector<ScenarioResult>& results, std::string_view metric)
{
    write_csv_row(out, {"scenario", "method", "metric", "min", "q1", "median", "q3", "max", "count"});
    for (const auto& r : results)
        for (const auto& m : r.methods) {
            std::vector<double> values;
            for (const auto& rep : m.reps) {
                if (!rep.converged) continue;
                if (metric == "estimation_error") values.push_back(rep.estimation_error);
                else if (metric == "tpr") values.push_back(rep.tpr);
                else if (metric == "fpr") values.push_back(rep.fpr);
                else if (metric == "deviance") values.push_back(rep.deviance);
                else throw ConfigError("unknown metric '" + std::string(metric) + "'");
            }
            if (values.empty()) continue;
            const auto b = svg::box_stats(m.summary.method, values);
            write_csv_row(out, {r.config.name, m.summary.method, std::string(metric), format_double(b.min),
                                format_double(b.q1), format_double(b.median), format_double(b.q3), format_double(b.max),
                                std::to_string(values.size())});
        }
}

void write_text_file(const std::string& path, const std::string& contents)
{
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << contents;
    if (!out) throw DataError("failed writing '" + path + "'");
}

CsvTable synthetic_asthma_sample(int n, std::uint64_t seed)
{
    if (n < 1) throw ConfigError("sample size must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Data-generating model on raw covariates: odds flow on every covariate,
    // lead acting on the risk ratio only.
    ModelSpec<double> truth = canonical_model({0, 1, 2, 3, 4}, {3}, {3});
    truth.flows[0].intercept = -2.6;
    truth.flows[0].coefficients << -0.01, 0.25, 0.35, 0.0, 0.03;
    truth.flows[1].coefficients << 0.12;
    truth.flows[2].coefficients << 0.0;

    CsvTable table;
    table.header = {"age", "sex", "smoking", "lead", "bmi", "asthma"};
    Vector<double> x(5);
    for (int i = 0; i < n; ++i) {
        const double age = std::floor(6.0 + 74.0 * unif(rng));
        const bool female = unif(rng) < 0.51;
        const bool smoker = unif(rng) < (age < 18.0 ? 0.08 : 0.42);
        const double lead = std::round(std::exp(std::log(1.3) + 0.7 * normal(rng)) * 100.0) / 100.0;
        const double bmi = std::round(std::clamp(20.0 + 0.1 * std::min(age, 50.0) + 5.0 * normal(rng), 14.0, 55.0) * 10.0) / 10.0;
        x << age, female ? 1.0 : 0.0, smoker ? 1.0 : 0.0, lead, bmi;
        const double p = std::clamp(compose_probability(truth, x), 0.0, 1.0);
        const bool asthma = unif(rng) < p;
        table.rows.push_back({format_double(age), female ? "female" : "male", smoker ? "yes" : "no",
                              format_fixed(lead, 2), format_fixed(bmi, 1), asthma ? "1" : "0"});
    }
    return table;
}

} // namespace rbc
