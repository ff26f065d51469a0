#include "dkgcm/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dkgcm/common.hpp"

namespace dkgcm {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) {
      lo = 0;
      hi = 1;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void write_frame(std::ofstream& os, const std::string& title, const std::string& x_label,
                 const std::string& y_label, const Range& xr, const Range& yr) {
  os << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << kWidth - kLeft - kRight
     << "' height='" << kHeight - kTop - kBottom
     << "' fill='none' stroke='#333' stroke-width='1'/>\n";
  os << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='16'>"
     << title << "</text>\n";
  os << "<text x='" << kWidth / 2 << "' y='" << kHeight - 12
     << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
  os << "<text x='16' y='" << kHeight / 2
     << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " << kHeight / 2
     << ")'>" << y_label << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double px = xr.map(fx, kLeft, kWidth - kRight);
    const double py = yr.map(fy, kHeight - kBottom, kTop);
    os << "<text x='" << px << "' y='" << kHeight - kBottom + 16
       << "' text-anchor='middle' font-size='10'>" << fmt(fx) << "</text>\n";
    os << "<text x='" << kLeft - 6 << "' y='" << py + 3
       << "' text-anchor='end' font-size='10'>" << fmt(fy) << "</text>\n";
  }
}

}  // namespace

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  std::ofstream os(path);
  require(os.good(), "cannot write " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
     << kHeight << "'>\n";
  os << "<!-- data\n";
  for (const auto& s : series) {
    os << "series: " << s.label << "\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << fmt(s.x[i]) << "," << fmt(s.y[i]) << "\n";
  }
  os << "-->\n";

  Range xr, yr;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.include(s.x[i]);
      yr.include(s.y[i]);
    }
  xr.pad();
  yr.pad();
  write_frame(os, title, x_label, y_label, xr, yr);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << xr.map(s.x[i], kLeft, kWidth - kRight) << ","
         << yr.map(s.y[i], kHeight - kBottom, kTop) << " ";
    os << "'/>\n";
    os << "<text x='" << kWidth - kRight - 6 << "' y='" << kTop + 16 + 14 * si
       << "' text-anchor='end' font-size='11' fill='" << color << "'>" << s.label
       << "</text>\n";
  }
  os << "</svg>\n";
  require(os.good(), "write failed for " + path);
}

void write_svg_bars(const std::string& path, const std::string& title,
                    const std::string& y_label,
                    const std::vector<std::pair<std::string, double>>& bars) {
  std::ofstream os(path);
  require(os.good(), "cannot write " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
     << kHeight << "'>\n";
  os << "<!-- data\n";
  for (const auto& [label, v] : bars) os << label << "," << fmt(v) << "\n";
  os << "-->\n";

  Range yr;
  yr.include(0.0);
  for (const auto& [label, v] : bars) yr.include(v);
  yr.pad();
  Range xr;
  xr.lo = 0;
  xr.hi = 1;
  write_frame(os, title, "", y_label, xr, yr);

  const double span = kWidth - kLeft - kRight;
  const double bw = span / (2.0 * static_cast<double>(bars.size()) + 1.0);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = kLeft + bw * (1.0 + 2.0 * static_cast<double>(i));
    const double y0 = yr.map(0.0, kHeight - kBottom, kTop);
    const double y1 = yr.map(bars[i].second, kHeight - kBottom, kTop);
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    os << "<rect x='" << x << "' y='" << std::min(y0, y1) << "' width='" << bw
       << "' height='" << std::abs(y0 - y1) << "' fill='" << color << "'/>\n";
    os << "<text x='" << x + bw / 2 << "' y='" << kHeight - kBottom + 28
       << "' text-anchor='middle' font-size='10'>" << bars[i].first << "</text>\n";
  }
  os << "</svg>\n";
  require(os.good(), "write failed for " + path);
}

}  // namespace dkgcm
