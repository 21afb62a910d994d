#pragma once

#include <span>
#include <string>

#include "psn/results.hpp"

namespace psn {

struct PlotOptions {
  std::string title = "evaluation return";
  std::string x_label = "episode";
  std::string y_label = "return";
  int width = 800;
  int height = 500;
};

// SVG line chart: one median line and shaded interquartile band per series.
std::string render_svg(std::span<const AggregateRow> rows, const PlotOptions& options = {});
void write_svg(std::span<const AggregateRow> rows, const std::string& path,
               const PlotOptions& options = {});

}  // namespace psn
