#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sgrad {

// Hand-rolled SVG plotting, enough for line charts and scatters. Output is
// well-formed XML with deterministic number formatting.

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string color = "#1f77b4";
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;  // log10 of positive values; nonpositive values are dropped
};

struct ScatterGroup {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string color = "#1f77b4";
  double radius = 2.0;
};

struct ScatterPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ScatterGroup> groups;
};

std::string render_line_plot(const LinePlot& plot);
std::string render_scatter_plot(const ScatterPlot& plot);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace sgrad
