#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace saber {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // NaN breaks the polyline
  std::string color;      // CSS color
};

// Horizontal significance bar along the x axis.
struct SvgBand {
  double x0 = 0.0;
  double x1 = 0.0;
};

// Dependency-free single-panel line plot: axes, tick labels, a legend, the
// series as polylines and the bands as bars under the plot area. Output is
// deterministic for identical inputs.
void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series, const std::vector<SvgBand>& bands);

}  // namespace saber
