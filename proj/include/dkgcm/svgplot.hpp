#pragma once

#include <string>
#include <vector>

namespace dkgcm {

/// One named series for a line plot.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained SVG line plot. The data table rides along in an XML
/// comment so the numbers can be recovered without the original run; no
/// timestamps are embedded, so identical inputs give identical bytes.
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

/// Self-contained SVG bar chart (one value per labelled bar).
void write_svg_bars(const std::string& path, const std::string& title,
                    const std::string& y_label,
                    const std::vector<std::pair<std::string, double>>& bars);

}  // namespace dkgcm
