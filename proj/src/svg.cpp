#include "rbc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rbc/io.hpp"

namespace rbc::svg {

namespace {

constexpr double width = 640, height = 420;
constexpr double left = 70, right = 20, top = 40, bottom = 60;

std::string num(double v) { return format_fixed(v, 2); }

/// Round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target = 5)
{
    const double span = hi - lo;
    if (!(span > 0)) return {lo};
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
        out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
    return out;
}

std::string tick_label(double v)
{
    std::string s = format_fixed(v, 4);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

Range padded(double lo, double hi)
{
    if (!(hi > lo)) {
        const double pad = std::max(std::abs(lo) * 0.1, 1e-3);
        return {lo - pad, hi + pad};
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

void frame(std::ostringstream& os, const std::string& title, const std::string& x_label, const std::string& y_label)
{
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
       << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
    os << "<text x=\"" << num(left + (width - left - right) / 2) << "\" y=\"" << num(height - 14)
       << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << num(top + (height - top - bottom) / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
    os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(width - left - right)
       << "\" height=\"" << num(height - top - bottom) << "\" fill=\"none\" stroke=\"black\"/>\n";
}

} // namespace

std::string escape(const std::string& text)
{
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string render(const LineChart& chart)
{
    auto tx = [&](double v) { return chart.log_x ? std::log10(v) : v; };
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& s : chart.series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("series '" + s.label + "' has mismatched x/y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            xlo = std::min(xlo, tx(s.x[i]));
            xhi = std::max(xhi, tx(s.x[i]));
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    }
    if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    const Range xr = chart.x_range ? Range{tx(chart.x_range->lo), tx(chart.x_range->hi)} : padded(xlo, xhi);
    const Range yr = chart.y_range ? *chart.y_range : padded(ylo, yhi);

    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double v) { return left + (tx(v) - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double v) { return top + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream os;
    frame(os, chart.title, chart.x_label, chart.y_label);
    for (double t : ticks(xr.lo, xr.hi)) {
        const double x = left + (t - xr.lo) / (xr.hi - xr.lo) * pw;
        os << "<line x1=\"" << num(x) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(x) << "\" y2=\""
           << num(top + ph + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(x) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">"
           << (chart.log_x ? "1e" + tick_label(t) : tick_label(t)) << "</text>\n";
    }
    for (double t : ticks(yr.lo, yr.hi)) {
        os << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left) << "\" y2=\""
           << num(py(t)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << tick_label(t)
           << "</text>\n";
    }

    double legend_y = top + 16;
    for (const auto& s : chart.series) {
        os << "<polyline fill=\"none\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.5\"";
        if (s.dashed) os << " stroke-dasharray=\"6,4\"";
        os << " points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << (first ? "" : " ") << num(px(s.x[i])) << ',' << num(py(std::clamp(s.y[i], yr.lo, yr.hi)));
            first = false;
        }
        os << "\"/>\n";
        if (!s.label.empty()) {
            os << "<line x1=\"" << num(left + 12) << "\" y1=\"" << num(legend_y - 4) << "\" x2=\"" << num(left + 36)
               << "\" y2=\"" << num(legend_y - 4) << "\" stroke=\"" << escape(s.color) << "\" stroke-width=\"1.5\""
               << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
            os << "<text x=\"" << num(left + 42) << "\" y=\"" << num(legend_y) << "\">" << escape(s.label) << "</text>\n";
            legend_y += 16;
        }
    }
    os << "</svg>\n";
    return os.str();
}

double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BoxStats box_stats(std::string label, const std::vector<double>& values)
{
    BoxStats b;
    b.label = std::move(label);
    b.min = quantile(values, 0.0);
    b.q1 = quantile(values, 0.25);
    b.median = quantile(values, 0.5);
    b.q3 = quantile(values, 0.75);
    b.max = quantile(values, 1.0);
    return b;
}

std::string render(const BoxChart& chart)
{
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& b : chart.boxes) {
        lo = std::min(lo, b.min);
        hi = std::max(hi, b.max);
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    const Range yr = padded(lo, hi);
    const double pw = width - left - right, ph = height - top - bottom;
    auto py = [&](double v) { return top + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream os;
    frame(os, chart.title, "", chart.y_label);
    for (double t : ticks(yr.lo, yr.hi)) {
        os << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left) << "\" y2=\""
           << num(py(t)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << tick_label(t)
           << "</text>\n";
    }
    const double slot = chart.boxes.empty() ? pw : pw / static_cast<double>(chart.boxes.size());
    for (std::size_t i = 0; i < chart.boxes.size(); ++i) {
        const auto& b = chart.boxes[i];
        const double cx = left + slot * (static_cast<double>(i) + 0.5);
        const double half = std::min(30.0, slot * 0.3);
        os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(py(b.max)) << "\" x2=\"" << num(cx) << "\" y2=\""
           << num(py(b.q3)) << "\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(py(b.q1)) << "\" x2=\"" << num(cx) << "\" y2=\""
           << num(py(b.min)) << "\" stroke=\"black\"/>\n";
        os << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(py(b.q3)) << "\" width=\"" << num(2 * half)
           << "\" height=\"" << num(std::max(0.0, py(b.q1) - py(b.q3))) << "\" fill=\"#aec7e8\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(py(b.median)) << "\" x2=\"" << num(cx + half)
           << "\" y2=\"" << num(py(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(cx) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << escape(b.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace rbc::svg
