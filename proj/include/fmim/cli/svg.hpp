#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace fmim::cli {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Self-contained SVG line chart with axes, ticks and a legend.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);

/// One stacked bar per row of counts (e.g. per client), one segment per column.
std::string stacked_bars(const std::string& title, const std::string& bar_label,
                         const std::vector<std::vector<std::size_t>>& counts);

}  // namespace fmim::cli
