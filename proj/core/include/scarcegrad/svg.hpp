#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace scarcegrad {

// Self-contained static SVG plots; no external assets or scripts.
struct SvgSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x;
    std::vector<double> y;
    bool points_only = false;  // scatter instead of polyline
};

struct SvgPlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;  // nonpositive values are dropped from log plots
    std::vector<SvgSeries> series;
};

void write_svg_plot(const std::filesystem::path& path, const SvgPlotSpec& spec);

}  // namespace scarcegrad
