#pragma once

// Minimal deterministic SVG charts: line charts and boxplots.

#include <optional>
#include <string>
#include <vector>

namespace rbc::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    /// Derived from the data when left unset.
    std::optional<Range> x_range;
    std::optional<Range> y_range;
    bool log_x = false;
};

std::string render(const LineChart& chart);

struct BoxStats {
    std::string label;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Linear-interpolation quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double prob);

BoxStats box_stats(std::string label, const std::vector<double>& values);

struct BoxChart {
    std::string title;
    std::string y_label;
    std::vector<BoxStats> boxes;
};

std::string render(const BoxChart& chart);

/// Escapes &, <, >, " for XML text and attributes.
std::string escape(const std::string& text);

} // namespace rbc::svg
