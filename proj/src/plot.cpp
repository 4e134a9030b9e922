#include "pearl/plot.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pearl {
namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double PlotModel::px(double x) const {
  const double span = x_max > x_min ? x_max - x_min : 1.0;
  return kLeft + (x - x_min) / span * (kWidth - kLeft - kRight);
}

double PlotModel::py(double y) const {
  const double span = y_max > y_min ? y_max - y_min : 1.0;
  return kHeight - kBottom - (y - y_min) / span * (kHeight - kTop - kBottom);
}

PlotSeries load_aggregate_csv(const std::filesystem::path& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open aggregate CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,mean_return,stderr", 0) != 0)
    throw UsageError("aggregate CSV " + path.string() +
                     " is missing the 'step,mean_return,stderr' header");
  PlotSeries series;
  series.label = label;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string step, mean, err;
    if (!std::getline(row, step, ',') || !std::getline(row, mean, ',') ||
        !std::getline(row, err, ','))
      throw UsageError("aggregate CSV " + path.string() + " line " + std::to_string(line_no) +
                       ": expected three columns");
    try {
      series.steps.push_back(std::stod(step));
      series.means.push_back(std::stod(mean));
      series.stderrs.push_back(std::stod(err));
    } catch (const std::exception&) {
      throw UsageError("aggregate CSV " + path.string() + " line " + std::to_string(line_no) +
                       ": non-numeric value");
    }
  }
  return series;
}

PlotModel build_plot(std::vector<PlotSeries> series) {
  PlotModel model;
  bool any = false;
  for (const auto& s : series) {
    if (s.steps.size() != s.means.size() || s.steps.size() != s.stderrs.size())
      throw UsageError("plot series '" + s.label + "' has mismatched column lengths");
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      const double lo = s.means[i] - s.stderrs[i];
      const double hi = s.means[i] + s.stderrs[i];
      if (!any) {
        model.x_min = model.x_max = s.steps[i];
        model.y_min = lo;
        model.y_max = hi;
        any = true;
      } else {
        model.x_min = std::min(model.x_min, s.steps[i]);
        model.x_max = std::max(model.x_max, s.steps[i]);
        model.y_min = std::min(model.y_min, lo);
        model.y_max = std::max(model.y_max, hi);
      }
    }
  }
  model.series = std::move(series);
  return model;
}

std::string render_svg(const PlotModel& model) {
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";

  // Axes.
  const double x0 = PlotModel::kLeft, x1 = PlotModel::kWidth - PlotModel::kRight;
  const double y0 = PlotModel::kHeight - PlotModel::kBottom, y1 = PlotModel::kTop;
  svg += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x1) + "\" y2=\"" +
         fmt(y0) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x0) + "\" y2=\"" +
         fmt(y1) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + fmt(x0) + "\" y=\"" + fmt(y0 + 18.0) +
         "\" font-size=\"12\" font-family=\"monospace\">" + fmt_tick(model.x_min) + "</text>\n";
  svg += "<text x=\"" + fmt(x1 - 40.0) + "\" y=\"" + fmt(y0 + 18.0) +
         "\" font-size=\"12\" font-family=\"monospace\">" + fmt_tick(model.x_max) + "</text>\n";
  svg += "<text x=\"" + fmt(4.0) + "\" y=\"" + fmt(y0) +
         "\" font-size=\"12\" font-family=\"monospace\">" + fmt_tick(model.y_min) + "</text>\n";
  svg += "<text x=\"" + fmt(4.0) + "\" y=\"" + fmt(y1 + 10.0) +
         "\" font-size=\"12\" font-family=\"monospace\">" + fmt_tick(model.y_max) + "</text>\n";
  svg += "<text x=\"" + fmt((x0 + x1) / 2.0 - 20.0) + "\" y=\"" + fmt(y0 + 36.0) +
         "\" font-size=\"12\" font-family=\"monospace\">step</text>\n";

  for (std::size_t k = 0; k < model.series.size(); ++k) {
    const auto& s = model.series[k];
    const char* color = kPalette[k % kPaletteSize];
    if (!s.steps.empty()) {
      // +/- 1 stderr band: upper edge forward, lower edge back.
      std::string band = "<polygon fill=\"" + std::string(color) +
                         "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.steps.size(); ++i)
        band += fmt(model.px(s.steps[i])) + "," + fmt(model.py(s.means[i] + s.stderrs[i])) + " ";
      for (std::size_t i = s.steps.size(); i-- > 0;)
        band += fmt(model.px(s.steps[i])) + "," + fmt(model.py(s.means[i] - s.stderrs[i])) + " ";
      band.pop_back();
      svg += band + "\"/>\n";

      std::string line = "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                         "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.steps.size(); ++i)
        line += fmt(model.px(s.steps[i])) + "," + fmt(model.py(s.means[i])) + " ";
      line.pop_back();
      svg += line + "\"/>\n";
    }
    // Legend entry.
    const double ly = y1 + 16.0 * static_cast<double>(k);
    svg += "<rect x=\"" + fmt(x1 - 150.0) + "\" y=\"" + fmt(ly) +
           "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"" + fmt(x1 - 134.0) + "\" y=\"" + fmt(ly + 10.0) +
           "\" font-size=\"12\" font-family=\"monospace\" class=\"legend\">" + s.label +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::filesystem::path plot_run_directories(const std::vector<std::filesystem::path>& dirs) {
  if (dirs.empty()) throw UsageError("plot requires at least one run directory");
  std::vector<PlotSeries> series;
  for (const auto& dir : dirs)
    series.push_back(load_aggregate_csv(dir / "aggregate.csv", dir.filename().string()));
  const std::string svg = render_svg(build_plot(std::move(series)));
  const std::filesystem::path out = dirs.front() / "plot.svg";
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw UsageError("cannot write " + out.string());
  file << svg;
  return out;
}

}  // namespace pearl
