#include "tcwm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tcwm/datastore.hpp"

namespace tcwm {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    if (v != 0 && (std::fabs(v) < 1e-2 || std::fabs(v) >= 1e4)) std::snprintf(buf, sizeof buf, "%.1e", v);
    else std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_json_report(const std::filesystem::path& file, const nlohmann::json& j) {
    write_text_atomic(file, j.dump(2) + "\n");
}

std::string render_svg(const LineChart& chart) {
    const auto usable = [&](double v) { return std::isfinite(v) && (!chart.log_y || v > 0); };
    const auto ty = [&](double v) { return chart.log_y ? std::log10(v) : v; };

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t n_max = 0;
    for (const auto& s : chart.series) {
        n_max = std::max(n_max, s.values.size());
        for (double v : s.values) {
            if (!usable(v)) continue;
            lo = std::min(lo, ty(v));
            hi = std::max(hi, ty(v));
        }
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    std::vector<double> xs = chart.x_values;
    for (std::size_t i = xs.size(); i < n_max; ++i) xs.push_back(double(i));
    double x_lo = 0.0, x_hi = 1.0;
    if (!xs.empty()) {
        x_lo = *std::min_element(xs.begin(), xs.end());
        x_hi = *std::max_element(xs.begin(), xs.end());
        if (x_hi - x_lo < 1e-12) x_lo -= 0.5, x_hi += 0.5;
    }

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const auto px = [&](double x) { return kLeft + pw * (x - x_lo) / (x_hi - x_lo); };
    const auto py = [&](double v) { return kTop + ph * (1.0 - (ty(v) - lo) / (hi - lo)); };
    const auto py_raw = [&](double t) { return kTop + ph * (1.0 - (t - lo) / (hi - lo)); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(chart.title) + "</text>\n";
    svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (int k = 0; k <= 4; ++k) {
        const double t = lo + (hi - lo) * k / 4.0;
        const double y = py_raw(t);
        const double label = chart.log_y ? std::pow(10.0, t) : t;
        svg += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(y) + "\" y2=\"" + num(y) +
               "\" stroke=\"#ddd\"/>\n";
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" +
               tick_label(label) + "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double x = x_lo + (x_hi - x_lo) * k / 4.0;
        svg += "<text x=\"" + num(px(x)) + "\" y=\"" + num(kTop + ph + 16) + "\" text-anchor=\"middle\">" +
               tick_label(x) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
           escape(chart.x_label) + "</text>\n";
    svg += "<text transform=\"translate(16 " + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           escape(chart.y_label + (chart.log_y ? " (log)" : "")) + "</text>\n";

    for (std::size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        const char* color = kColors[si % std::size(kColors)];
        std::string d;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (!usable(s.values[i])) {
                pen_down = false;
                continue;
            }
            d += (pen_down ? "L" : "M") + num(px(xs[i])) + " " + num(py(s.values[i])) + " ";
            pen_down = true;
        }
        if (!d.empty()) {
            d.pop_back();
            svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        }
        const double ly = kTop + 12 + 16 * double(si);
        svg += "<line x1=\"" + num(kLeft + pw + 10) + "\" x2=\"" + num(kLeft + pw + 28) + "\" y1=\"" + num(ly) +
               "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(kLeft + pw + 32) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.name) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void write_svg_chart(const std::filesystem::path& file, const LineChart& chart) {
    write_text_atomic(file, render_svg(chart));
}

}  // namespace tcwm
