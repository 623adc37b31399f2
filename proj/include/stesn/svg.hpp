#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "stesn/errors.hpp"

namespace stesn {

/// One polyline of a chart.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

/// Renders a fixed-size SVG line chart. Output is a pure function of the
/// inputs, byte for byte. `event_x` draws dashed vertical marker lines.
inline void export_svg_lines(const std::vector<PlotSeries>& series,
                             const std::string& path,
                             const std::string& title = {},
                             const std::string& x_label = {},
                             const std::string& y_label = {},
                             const std::vector<double>& event_x = {}) {
  if (series.empty()) throw ValidationError("nothing to plot");
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw ValidationError("plot series '" + s.label + "' is empty or ragged");
  }

  double xmin = series[0].x[0], xmax = xmin, ymin = series[0].y[0], ymax = ymin;
  for (const auto& s : series) {
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  }
  for (double v : event_x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
  if (xmax == xmin) { xmax += 1.0; xmin -= 1.0; }
  if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }

  constexpr double width = 840.0, height = 520.0;
  constexpr double left = 70.0, right = 190.0, top = 40.0, bottom = 50.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto sx = [&](double v) { return left + (v - xmin) / (xmax - xmin) * plot_w; };
  auto sy = [&](double v) {
    return top + plot_h - (v - ymin) / (ymax - ymin) * plot_h;
  };

  static constexpr std::array<const char*, 8> palette = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
      "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  if (!title.empty())
    os << "<text x=\"" << detail::fmt_coord(left + plot_w / 2)
       << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
       << "</text>\n";

  // axes
  os << "<line x1=\"" << detail::fmt_coord(left) << "\" y1=\""
     << detail::fmt_coord(top + plot_h) << "\" x2=\""
     << detail::fmt_coord(left + plot_w) << "\" y2=\""
     << detail::fmt_coord(top + plot_h) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << detail::fmt_coord(left) << "\" y1=\""
     << detail::fmt_coord(top) << "\" x2=\"" << detail::fmt_coord(left)
     << "\" y2=\"" << detail::fmt_coord(top + plot_h)
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 5.0;
    const double fy = ymin + (ymax - ymin) * i / 5.0;
    os << "<text x=\"" << detail::fmt_coord(sx(fx)) << "\" y=\""
       << detail::fmt_coord(top + plot_h + 18)
       << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::fmt_tick(fx)
       << "</text>\n";
    os << "<text x=\"" << detail::fmt_coord(left - 8) << "\" y=\""
       << detail::fmt_coord(sy(fy) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt_tick(fy)
       << "</text>\n";
  }
  if (!x_label.empty())
    os << "<text x=\"" << detail::fmt_coord(left + plot_w / 2) << "\" y=\""
       << detail::fmt_coord(height - 12)
       << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label
       << "</text>\n";
  if (!y_label.empty())
    os << "<text x=\"18\" y=\"" << detail::fmt_coord(top + plot_h / 2)
       << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
          "18 "
       << detail::fmt_coord(top + plot_h / 2) << ")\">" << y_label
       << "</text>\n";

  for (double ev : event_x)
    os << "<line x1=\"" << detail::fmt_coord(sx(ev)) << "\" y1=\""
       << detail::fmt_coord(top) << "\" x2=\"" << detail::fmt_coord(sx(ev))
       << "\" y2=\"" << detail::fmt_coord(top + plot_h)
       << "\" stroke=\"#555555\" stroke-dasharray=\"5,4\"/>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % palette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << detail::fmt_coord(sx(s.x[i])) << ',' << detail::fmt_coord(sy(s.y[i]));
    }
    os << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << detail::fmt_coord(left + plot_w + 12) << "\" y1=\""
       << detail::fmt_coord(ly - 4) << "\" x2=\""
       << detail::fmt_coord(left + plot_w + 34) << "\" y2=\""
       << detail::fmt_coord(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << detail::fmt_coord(left + plot_w + 40) << "\" y=\""
       << detail::fmt_coord(ly) << "\" font-size=\"12\">" << s.label
       << "</text>\n";
  }
  os << "</svg>\n";
  if (!os.good()) throw IoError("failed writing '" + path + "'");
}

}  // namespace stesn
