#include "hdmed/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hdmed::cli {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 120.0;
constexpr double kTop = 36.0;
constexpr double kBottom = 48.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

}  // namespace

std::string render_svg(const Chart& chart) {
  auto tx = [&](double x) { return chart.log_x ? std::log10(x) : x; };
  Range xr, yr;
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      xr.add(tx(x));
      yr.add(y);
    }
  }
  if (chart.reference_y) yr.add(*chart.reference_y);
  xr.pad();
  yr.pad();
  if (chart.diagonal) {
    xr.lo = yr.lo = std::min(xr.lo, yr.lo);
    xr.hi = yr.hi = std::max(xr.hi, yr.hi);
  }

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o.precision(5);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"13\">" << escape(chart.title) << "</text>\n";
  o << "<polyline fill=\"none\" stroke=\"black\" points=\"" << kLeft << ',' << kTop << ' ' << kLeft
    << ',' << kTop + ph << ' ' << kLeft + pw << ',' << kTop + ph << "\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
    const double y = py(fy);
    o << "<polyline stroke=\"black\" points=\"" << kLeft - 4 << ',' << y << ' ' << kLeft << ',' << y
      << "\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fy
      << "</text>\n";
    const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
    const double x = kLeft + pw * t / 4.0;
    o << "<polyline stroke=\"black\" points=\"" << x << ',' << kTop + ph << ' ' << x << ','
      << kTop + ph + 4 << "\"/>\n";
    o << "<text x=\"" << x << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
      << (chart.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
    << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  o << "<text x=\"14\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << kTop + ph / 2 << ")\">" << escape(chart.y_label) << "</text>\n";

  if (chart.reference_y) {
    const double y = py(*chart.reference_y);
    o << "<polyline fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\" points=\"" << kLeft << ','
      << y << ' ' << kLeft + pw << ',' << y << "\"/>\n";
  }
  if (chart.diagonal) {
    o << "<polyline fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\" points=\"" << kLeft << ','
      << kTop + ph << ' ' << kLeft + pw << ',' << kTop << "\"/>\n";
  }

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const Series& s = chart.series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) o << px(x) << ',' << py(y) << ' ';
      o << "\"/>\n";
    } else {
      for (const auto& [x, y] : s.points) {
        const double cx = px(x), cy = py(y);
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"" << cx - 2 << ',' << cy
          << ' ' << cx + 2 << ',' << cy << ' ' << cx << ',' << cy << ' ' << cx << ',' << cy - 2
          << ' ' << cx << ',' << cy + 2 << "\"/>\n";
      }
    }
    const double ly = kTop + 12 + 16.0 * static_cast<double>(i);
    o << "<polyline stroke=\"" << colour << "\" stroke-width=\"2\" points=\"" << kLeft + pw + 8
      << ',' << ly - 4 << ' ' << kLeft + pw + 22 << ',' << ly - 4 << "\"/>\n";
    o << "<text x=\"" << kLeft + pw + 26 << "\" y=\"" << ly << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hdmed::cli
