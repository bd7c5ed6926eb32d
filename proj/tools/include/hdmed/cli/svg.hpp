#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hdmed::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  /// Joined by a line; otherwise drawn as small crosses.
  bool line = true;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
  /// Dashed horizontal reference line.
  std::optional<double> reference_y;
  /// Dashed y = x reference line (QQ plots).
  bool diagonal = false;
};

/// A standalone SVG document built from polyline and text elements only.
std::string render_svg(const Chart& chart);

}  // namespace hdmed::cli
