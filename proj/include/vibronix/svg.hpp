// Minimal self-contained SVG line/scatter plots. One <g class="dataset">
// element per series.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vibronix::svg {

enum class Style { Line, Points, Band };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_upper;  // Band only: y is the lower edge
  Style style = Style::Line;
  std::string color = "#1f77b4";
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
  double width = 640.0;
  double height = 420.0;

  std::string render() const;
  void write(const std::filesystem::path& path) const;
};

std::string escape(const std::string& text);

}  // namespace vibronix::svg
