#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace tcwm {

// Pretty JSON with sorted keys and a trailing newline, written atomically.
void write_json_report(const std::filesystem::path& file, const nlohmann::json& j);

struct ChartSeries {
    std::string name;
    std::vector<double> values;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x_values;  // shared by all series; empty means 0, 1, 2, ...
    bool log_y = false;
    std::vector<ChartSeries> series;
};

// Self-contained SVG; identical input gives identical bytes. Non-finite
// points (and non-positive ones on a log axis) break the line.
std::string render_svg(const LineChart& chart);
void write_svg_chart(const std::filesystem::path& file, const LineChart& chart);

}  // namespace tcwm
