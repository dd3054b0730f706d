#pragma once

// Minimal SVG line plots for the figure commands.

#include <string>
#include <vector>

namespace qgain {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

/// Non-finite points, and non-positive ones on a log axis, are skipped and
/// break the line.
std::string line_plot_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);

} // namespace qgain
