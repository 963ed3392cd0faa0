#pragma once

// CSV ingestion and the plain-text artifacts written by the command-line tool.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbc/simulation.hpp"

namespace rbc {

/// Shortest decimal form that parses back to the same double. Locale independent.
std::string format_double(double value);

/// Fixed notation with `digits` decimals. Locale independent.
std::string format_fixed(double value, int digits);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; DataError when absent.
    std::size_t column(std::string_view name) const;
};

/// Comma-separated text with a header row; double-quoted fields may contain commas and "".
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Writes one RFC-4180 record terminated by a line feed.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

struct ColumnScale {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
    bool standardized = false;
};

struct LoadOptions {
    std::string outcome;
    /// Covariates to keep, in order; every non-outcome column when empty.
    std::vector<std::string> covariates;
    /// z-score covariates that take values other than 0 and 1.
    bool standardize = false;
};

struct LoadedData {
    Dataset<double> data;
    std::vector<ColumnScale> scales;
};

/// Binary text cells: female/yes/true -> 1, male/no/false -> 0 (case-insensitive).
std::optional<double> binary_code(std::string_view cell);

LoadedData load_csv(const CsvTable& table, const LoadOptions& options);
LoadedData load_csv(const std::string& path, const LoadOptions& options);

/// Column index of a covariate name; ConfigError when absent.
Eigen::Index feature_index(const Dataset<double>& data, const std::string& name);

/// flow,term,estimate rows. Every flow gets an "(Intercept)" row (0 when the flow has none).
void write_coefficients(std::ostream& out, const ModelSpec<double>& model, const std::vector<std::string>& feature_names);
void write_coefficients_file(const std::string& path, const ModelSpec<double>& model,
                             const std::vector<std::string>& feature_names);

/// Reads a coefficient table back. Term names are resolved against `feature_names`; flows are
/// returned in the order they first appear. Flows get an intercept when their row is non-zero
/// or when `intercept_flows` lists them.
ModelSpec<double> load_coefficients(std::istream& in, const std::vector<std::string>& feature_names,
                                    const std::vector<FlowKind>& intercept_flows = {});
ModelSpec<double> load_coefficients_file(const std::string& path, const std::vector<std::string>& feature_names,
                                         const std::vector<FlowKind>& intercept_flows = {});

void write_trace(std::ostream& out, const std::vector<double>& trace);

/// key=value lines in insertion order.
using Metadata = std::vector<std::pair<std::string, std::string>>;
void write_metadata(std::ostream& out, const Metadata& meta);

/// scenario,method,rep,estimation_error,tpr,fpr,deviance,nonzero_count,converged
void write_scenario_csv(std::ostream& out, const ScenarioResult& result);

/// One row per (scenario, method) with mean metrics; deviance is mean held-out NLL.
void write_summary_csv(std::ostream& out, const std::vector<ScenarioResult>& results);

/// Five-number summaries of one metric per (scenario, method), for boxplots.
void write_quantiles_csv(std::ostream& out, const std::vector<ScenarioResult>& results, std::string_view metric);

/// Writes `contents` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& contents);

/// Synthetic asthma/lead sample with columns age, sex, smoking, lead, bmi, asthma.
CsvTable synthetic_asthma_sample(int n, std::uint64_t seed);

} // namespace rbc
