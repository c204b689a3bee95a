#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "histcal/assessment.hpp"
#include "histcal/format.hpp"

namespace histcal {

/// `epsilon,mean,stderr`, full precision.
inline void write_curve_csv(std::ostream& os, const AggregatedCurve& c) {
  os << "epsilon,mean,stderr\n";
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    os << exact(c.grid[g]) << ',' << exact(c.mean[g]) << ',' << exact(c.stderr_[g]) << '\n';
  }
}

inline AggregatedCurve single_run(const ValidityCurve& c) {
  return {c.grid, c.values, std::vector<double>(c.values.size(), 0.0), 1};
}

/// `deviation,mass` for each exact jump of a curve.
inline void write_jumps_csv(std::ostream& os, const ValidityCurve& c) {
  os << "deviation,mass\n";
  for (const auto& j : c.jumps) os << exact(j.deviation) << ',' << exact(j.mass) << '\n';
}

struct SvgSeries {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stderr_;  // empty: no band
};

/// Self-contained SVG line plot over a shared epsilon grid, with a shaded
/// +-stderr band per series.
inline void write_svg(std::ostream& os, const std::string& title, const std::vector<double>& grid,
                      const std::vector<SvgSeries>& series, double x_max = 1.0) {
  constexpr double kW = 640, kH = 420, kL = 60, kR = 170, kT = 40, kB = 50;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double x) { return kL + pw * std::min(x, x_max) / x_max; };
  auto py = [&](double y) { return kT + ph * (1.0 - std::clamp(y, 0.0, 1.0)); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double x = x_max * k / 5.0, y = k / 5.0;
    os << "<text x=\"" << px(x) << "\" y=\"" << kT + ph + 18 << "\" text-anchor=\"middle\">" << brief(x) << "</text>\n";
    os << "<text x=\"" << kL - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << brief(y) << "</text>\n";
  }
  os << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">epsilon</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sr = series[s];
    const char* color = kColors[s % std::size(kColors)];
    std::vector<std::size_t> idx;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (grid[g] <= x_max) idx.push_back(g);
    }
    if (!sr.stderr_.empty()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (auto g : idx) os << px(grid[g]) << ',' << py(sr.mean[g] + sr.stderr_[g]) << ' ';
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
        os << px(grid[*it]) << ',' << py(sr.mean[*it] - sr.stderr_[*it]) << ' ';
      }
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto g : idx) os << px(grid[g]) << ',' << py(sr.mean[g]) << ' ';
    os << "\"/>\n";
    const double ly = kT + 16 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << kL + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kL + pw + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kL + pw + 36 << "\" y=\"" << ly + 4 << "\">" << sr.name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace histcal
