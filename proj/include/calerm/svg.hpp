#ifndef CALERM_SVG_HPP
#define CALERM_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace calerm::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

}  // namespace detail

/// Static line plot. Axes switch to log scale when every value on them is
/// positive and `log_axes` is set; non-finite points are skipped.
inline void line_plot(std::ostream& os, const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label, bool log_axes = true) {
  constexpr double width = 640, height = 420, left = 70, right = 150, top = 40, bottom = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  bool x_pos = true, y_pos = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
      x_pos = x_pos && s.x[i] > 0.0;
      y_pos = y_pos && s.y[i] > 0.0;
    }
  const bool empty = !(xmin <= xmax);
  if (empty) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  const bool lx = log_axes && x_pos && !empty, ly = log_axes && y_pos && !empty;
  auto tx = [&](double v) { return lx ? std::log10(v) : v; };
  auto ty = [&](double v) { return ly ? std::log10(v) : v; };
  double x0 = tx(xmin), x1 = tx(xmax), y0 = ty(ymin), y1 = ty(ymax);
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << detail::escape(title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double vx = lx ? std::pow(10.0, fx) : fx, vy = ly ? std::pow(10.0, fy) : fy;
    os << "<text x=\"" << px(vx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
       << detail::fmt(vx) << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(vy) + 4 << "\" text-anchor=\"end\">"
       << detail::fmt(vy) << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
     << detail::escape(x_label) << (lx ? " (log)" : "") << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">" << detail::escape(y_label) << (ly ? " (log)" : "") << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 6];
    std::string points;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if ((lx && s.x[i] <= 0) || (ly && s.y[i] <= 0)) continue;
      points += detail::fmt(px(s.x[i])) + "," + detail::fmt(py(s.y[i])) + " ";
      os << "<circle cx=\"" << detail::fmt(px(s.x[i])) << "\" cy=\"" << detail::fmt(py(s.y[i]))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
       << "\"/>\n";
    const double ly_pos = top + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly_pos - 4 << "\" x2=\"" << left + pw + 30
       << "\" y2=\"" << ly_pos - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly_pos << "\">" << detail::escape(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace calerm::svg

#endif  // CALERM_SVG_HPP
