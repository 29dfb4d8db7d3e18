#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tgrowth::plot {

/// One y column drawn as a polyline against the shared x column.
struct Series {
  std::string name;
  std::vector<double> y;
};

/// Scattered points drawn as circles (e.g. raw measurements).
struct Markers {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotData {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
  std::vector<Markers> markers;
  /// Dashed vertical line, e.g. a train/test split.
  std::optional<double> vline;
};

/// Standalone SVG line chart with axes, ticks and a legend. Output depends
/// only on the input. DomainError for an empty or ragged series.
std::string render_svg(const PlotData& plot);

/// Writes render_svg(plot) to `path`.
void emit_plot(const PlotData& plot, const std::filesystem::path& path);

/// CSV twin: header `x,<series names...>` then one row per x.
void write_plot_csv(std::ostream& out, const PlotData& plot);

}  // namespace tgrowth::plot
