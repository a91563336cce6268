#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "subcast/grid.hpp"

namespace subcast::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

// Simple line chart; NaN samples break the polyline.
void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<Series>& series);

// Lat/lon heat map on a blue-white-red scale over [-limit, limit];
// NaN cells are hatched grey.
void write_heatmap(const std::filesystem::path& path, const std::string& title,
                   const Grid& grid, const std::vector<double>& values,
                   double limit = 1.0);

}  // namespace subcast::svg
