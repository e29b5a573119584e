#ifndef EVASION_SVG_HPP_
#define EVASION_SVG_HPP_

// Minimal dependency-free SVG figures: field heatmaps with level sets,
// paths and dots overlaid, and line charts of metric curves.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "evasion/geometry.hpp"
#include "evasion/path_tracer.hpp"

namespace evasion::svg {

struct Color {
  int r = 0, g = 0, b = 0;
  std::string hex() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
  }
};

inline constexpr Color kBlue{31, 90, 200};
inline constexpr Color kGreen{30, 150, 60};
inline constexpr Color kRed{210, 30, 30};
inline constexpr Color kCyan{0, 220, 230};
inline constexpr Color kWhite{255, 255, 255};
inline constexpr Color kBlack{0, 0, 0};

/// Viridis-like ramp; t is clamped to [0, 1].
inline Color colormap(double t) {
  static constexpr std::array<Color, 6> stops{{{68, 1, 84},
                                               {65, 68, 135},
                                               {42, 120, 142},
                                               {34, 168, 132},
                                               {122, 209, 81},
                                               {253, 231, 37}}};
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(k);
  const auto mix = [f](int a, int b) { return static_cast<int>(std::lround(a + f * (b - a))); };
  return {mix(stops[k].r, stops[k + 1].r), mix(stops[k].g, stops[k + 1].g),
          mix(stops[k].b, stops[k + 1].b)};
}

struct Polyline {
  std::vector<Point> points;
  Color color = kWhite;
  double width = 2.0;
  bool dashed = false;
};

struct Dot {
  Point at;
  Color color = kRed;
  double radius = 2.0;
};

/// One square panel of a scalar field over its domain.
struct FieldPanel {
  std::string title;
  const ScalarField* field = nullptr;  // heatmap; null draws a white background
  const ScalarField* contours = nullptr;
  int contour_levels = 15;
  std::vector<Polyline> lines;
  std::vector<Dot> dots;
};

namespace detail {

inline constexpr double kPlot = 400.0;
inline constexpr double kMarginLeft = 50.0;
inline constexpr double kMarginTop = 35.0;
inline constexpr double kColorbar = 80.0;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Marching squares on the node grid; each segment is emitted in plot pixels.
template <typename ToPixel>
void contour_segments(std::ostream& os, const ScalarField& f, double level,
                      const ToPixel& to_px) {
  const PdeGrid& g = f.grid();
  const int n = g.nodes_per_side();
  const auto edge_point = [&](int i0, int j0, int i1, int j1) {
    const double a = f(i0, j0);
    const double b = f(i1, j1);
    const double t = (a == b) ? 0.5 : std::clamp((level - a) / (b - a), 0.0, 1.0);
    return g.node(i0, j0) + t * (g.node(i1, j1) - g.node(i0, j0));
  };
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      // Corners counter-clockwise from (i, j); edges 0..3 are bottom, right, top, left.
      const bool c0 = f(i, j) > level, c1 = f(i + 1, j) > level;
      const bool c2 = f(i + 1, j + 1) > level, c3 = f(i, j + 1) > level;
      std::vector<Point> crossings;
      if (c0 != c1) crossings.push_back(edge_point(i, j, i + 1, j));
      if (c1 != c2) crossings.push_back(edge_point(i + 1, j, i + 1, j + 1));
      if (c2 != c3) crossings.push_back(edge_point(i + 1, j + 1, i, j + 1));
      if (c3 != c0) crossings.push_back(edge_point(i, j + 1, i, j));
      for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
        const auto [x0, y0] = to_px(crossings[k]);
        const auto [x1, y1] = to_px(crossings[k + 1]);
        os << "M" << num(x0) << ' ' << num(y0) << "L" << num(x1) << ' ' << num(y1);
      }
    }
  }
}

}  // namespace detail

inline void write_field_panel(std::ostream& os, const FieldPanel& panel, const Domain& domain) {
  using namespace detail;
  const double width = kMarginLeft + kPlot + kColorbar;
  const double height = kMarginTop + kPlot + 40.0;
  const auto to_px = [&](Point p) {
    return std::pair<double, double>{
        kMarginLeft + (p.x - domain.lower().x) / domain.width() * kPlot,
        kMarginTop + (1.0 - (p.y - domain.lower().y) / domain.height()) * kPlot};
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kMarginLeft) << "\" y=\"20\" font-size=\"14\">"
     << escape(panel.title) << "</text>\n";

  double lo = 0.0, hi = 1.0;
  if (panel.field) {
    lo = panel.field->min();
    hi = panel.field->max();
    const ScalarField& f = *panel.field;
    const PdeGrid& g = f.grid();
    const int cells = g.nodes_per_side() - 1;
    const double cw = kPlot / cells;
    os << "<g shape-rendering=\"crispEdges\">\n";
    for (int j = 0; j < cells; ++j) {
      for (int i = 0; i < cells; ++i) {
        const double v = 0.25 * (f(i, j) + f(i + 1, j) + f(i, j + 1) + f(i + 1, j + 1));
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        os << "<rect x=\"" << num(kMarginLeft + i * cw) << "\" y=\""
           << num(kMarginTop + kPlot - (j + 1) * cw) << "\" width=\"" << num(cw + 0.05)
           << "\" height=\"" << num(cw + 0.05) << "\" fill=\"" << colormap(t).hex() << "\"/>";
      }
      os << '\n';
    }
    os << "</g>\n";
    // Colorbar.
    const double bx = kMarginLeft + kPlot + 15.0;
    for (int k = 0; k < 50; ++k) {
      os << "<rect x=\"" << num(bx) << "\" y=\"" << num(kMarginTop + kPlot - (k + 1) * kPlot / 50)
         << "\" width=\"15\" height=\"" << num(kPlot / 50 + 0.5) << "\" fill=\""
         << colormap((k + 0.5) / 50).hex() << "\"/>";
    }
    os << "\n<text x=\"" << num(bx + 20) << "\" y=\"" << num(kMarginTop + 10) << "\">" << tick(hi)
       << "</text>\n";
    os << "<text x=\"" << num(bx + 20) << "\" y=\"" << num(kMarginTop + kPlot) << "\">" << tick(lo)
       << "</text>\n";
  }
  os << "<rect x=\"" << num(kMarginLeft) << "\" y=\"" << num(kMarginTop) << "\" width=\""
     << num(kPlot) << "\" height=\"" << num(kPlot) << "\" fill=\"none\" stroke=\"black\"/>\n";

  if (panel.contours && panel.contour_levels > 0) {
    const ScalarField& u = *panel.contours;
    const double ulo = u.min();
    const double uhi = u.max();
    os << "<path fill=\"none\" stroke=\"" << (panel.field ? "white" : "black")
       << "\" stroke-width=\"0.8\" d=\"";
    for (int k = 1; k <= panel.contour_levels; ++k) {
      const double level = ulo + (uhi - ulo) * k / (panel.contour_levels + 1);
      contour_segments(os, u, level, to_px);
    }
    os << "\"/>\n";
  }

  for (const Polyline& line : panel.lines) {
    if (line.points.size() < 2) continue;
    os << "<polyline fill=\"none\" stroke=\"" << line.color.hex() << "\" stroke-width=\""
       << num(line.width) << '"' << (line.dashed ? " stroke-dasharray=\"6 4\"" : "")
       << " points=\"";
    for (const Point& p : line.points) {
      const auto [x, y] = to_px(p);
      os << num(x) << ',' << num(y) << ' ';
    }
    os << "\"/>\n";
  }
  for (const Dot& d : panel.dots) {
    const auto [x, y] = to_px(d.at);
    os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(d.radius)
       << "\" fill=\"" << d.color.hex() << "\"/>";
  }
  os << "\n</svg>\n";
}

struct Series {
  std::string label;
  std::vector<double> values;  // values[j] is plotted at x = j + 1
  Color color = kBlue;
};

struct ChartPanel {
  std::string title;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> reference;  // horizontal red line
  std::string reference_label;
};

inline void write_chart_panel(std::ostream& os, const ChartPanel& chart) {
  using namespace detail;
  const double plot_w = 480.0;
  const double plot_h = 320.0;
  const double left = 70.0;
  const double top = 35.0;
  const double width = left + plot_w + 30.0;
  const double height = top + plot_h + 80.0;

  std::size_t xmax = 1;
  double ylo = std::numeric_limits<double>::infinity();
  double yhi = -std::numeric_limits<double>::infinity();
  for (const Series& s : chart.series) {
    xmax = std::max(xmax, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }
  if (chart.reference) {
    ylo = std::min(ylo, *chart.reference);
    yhi = std::max(yhi, *chart.reference);
  }
  if (!std::isfinite(ylo)) ylo = 0.0, yhi = 1.0;
  if (yhi <= ylo) yhi = ylo + 1.0;
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  const auto px = [&](double x) { return left + (x - 1.0) / std::max<double>(1.0, xmax - 1.0) * plot_w; };
  const auto py = [&](double y) { return top + (1.0 - (y - ylo) / (yhi - ylo)) * plot_h; };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(left) << "\" y=\"20\" font-size=\"14\">" << escape(chart.title)
     << "</text>\n";
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w)
     << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = ylo + (yhi - ylo) * k / 4;
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(y) + 4)
       << "\" text-anchor=\"end\">" << tick(y) << "</text>\n";
    const double x = 1.0 + (static_cast<double>(xmax) - 1.0) * k / 4;
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << num(top + plot_h + 16)
       << "\" text-anchor=\"middle\">" << tick(std::round(x)) << "</text>\n";
  }
  os << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(top + plot_h + 34)
     << "\" text-anchor=\"middle\">episode</text>\n";
  os << "<text x=\"16\" y=\"" << num(top + plot_h / 2) << "\" transform=\"rotate(-90 16 "
     << num(top + plot_h / 2) << ")\" text-anchor=\"middle\">" << escape(chart.y_label)
     << "</text>\n";

  if (chart.reference) {
    os << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w) << "\" y1=\""
       << num(py(*chart.reference)) << "\" y2=\"" << num(py(*chart.reference))
       << "\" stroke=\"" << kRed.hex() << "\" stroke-width=\"1.5\"/>\n";
  }
  for (const Series& s : chart.series) {
    if (s.values.empty()) continue;
    // Thin long series to about two points per pixel.
    const std::size_t stride = std::max<std::size_t>(1, s.values.size() / 1000);
    os << "<polyline fill=\"none\" stroke=\"" << s.color.hex() << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < s.values.size(); j += stride) {
      os << num(px(static_cast<double>(j + 1))) << ',' << num(py(s.values[j])) << ' ';
    }
    const std::size_t last = s.values.size() - 1;
    os << num(px(static_cast<double>(last + 1))) << ',' << num(py(s.values[last])) << "\"/>\n";
  }

  // Legend below the axis.
  double lx = left;
  const double ly = top + plot_h + 58;
  const auto legend = [&](const std::string& label, Color c) {
    os << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 20) << "\" y1=\"" << num(ly - 4)
       << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << c.hex() << "\" stroke-width=\"2\"/>";
    os << "<text x=\"" << num(lx + 25) << "\" y=\"" << num(ly) << "\">" << escape(label)
       << "</text>\n";
    lx += 40.0 + 7.0 * static_cast<double>(label.size());
  };
  for (const Series& s : chart.series) legend(s.label, s.color);
  if (chart.reference) legend(chart.reference_label, kRed);
  os << "</svg>\n";
}

}  // namespace evasion::svg

#endif  // EVASION_SVG_HPP_
