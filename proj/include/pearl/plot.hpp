#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pearl/tensor.hpp"

namespace pearl {

// One learning curve: mean with a +/- 1 stderr band at each step.
struct PlotSeries {
  std::string label;
  std::vector<double> steps;
  std::vector<double> means;
  std::vector<double> stderrs;
};

// Pixel-space geometry of the chart, exposed so the coordinate math is
// testable independently of the SVG text.
struct PlotModel {
  static constexpr double kWidth = 640.0, kHeight = 480.0;
  static constexpr double kLeft = 64.0, kRight = 24.0, kTop = 24.0, kBottom = 48.0;

  std::vector<PlotSeries> series;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;  // includes the stderr bands

  double px(double x) const;  // data -> pixel
  double py(double y) const;
};

// Reads an aggregate CSV (step,mean_return,stderr); UsageError on a missing
// or reordered header.
PlotSeries load_aggregate_csv(const std::filesystem::path& path, const std::string& label);

PlotModel build_plot(std::vector<PlotSeries> series);

// Deterministic SVG: same model -> identical bytes.
std::string render_svg(const PlotModel& model);

// Convenience for the CLI: overlays each directory's aggregate.csv and
// writes plot.svg into the first directory. Returns the SVG path.
std::filesystem::path plot_run_directories(const std::vector<std::filesystem::path>& dirs);

}  // namespace pearl
