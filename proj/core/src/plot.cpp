#include "tgrowth/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "tgrowth/errors.hpp"
#include "numfmt.hpp"

namespace tgrowth::plot {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 56.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double nice = norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct Axis {
  double lo, hi, step;
};

Axis make_axis(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const double step = nice_step(hi - lo, 5);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

void check(const PlotData& plot) {
  if (plot.x.empty()) throw DomainError("plot needs a non-empty x column");
  if (plot.series.empty() && plot.markers.empty()) throw DomainError("plot has no series");
  for (const auto& s : plot.series) {
    if (s.y.size() != plot.x.size()) throw DomainError("plot series '" + s.name + "' is ragged");
  }
  for (const auto& m : plot.markers) {
    if (m.x.size() != m.y.size()) throw DomainError("plot markers '" + m.name + "' are ragged");
  }
}

}  // namespace

std::string render_svg(const PlotData& plot) {
  check(plot);
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto take = [](double v, double& lo, double& hi) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  };
  for (double x : plot.x) take(x, xmin, xmax);
  for (const auto& s : plot.series)
    for (double y : s.y) take(y, ymin, ymax);
  for (const auto& m : plot.markers) {
    for (double x : m.x) take(x, xmin, xmax);
    for (double y : m.y) take(y, ymin, ymax);
  }
  if (!std::isfinite(ymin)) ymin = ymax = 0.0;
  const Axis ax = make_axis(xmin, xmax);
  const Axis ay = make_axis(ymin, ymax);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(plot.title) << "</text>\n";

  // Axes and ticks.
  svg << "<g stroke=\"#444\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(kLeft + pw)
      << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n";
  svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
      << "\" y2=\"" << fmt(kTop + ph) << "\"/>\n";
  svg << "</g>\n<g fill=\"#222\">\n";
  for (int i = 0; ax.lo + i * ax.step <= ax.hi + 1e-9 * ax.step; ++i) {
    const double v = ax.lo + i * ax.step;
    svg << "<text x=\"" << fmt(px(v)) << "\" y=\"" << fmt(kTop + ph + 16)
        << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
  }
  for (int i = 0; ay.lo + i * ay.step <= ay.hi + 1e-9 * ay.step; ++i) {
    const double v = ay.lo + i * ay.step;
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(v) + 4)
        << "\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 14)
      << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  svg << "<text transform=\"translate(18," << fmt(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.y_label) << "</text>\n";
  svg << "</g>\n";

  if (plot.vline) {
    svg << "<line x1=\"" << fmt(px(*plot.vline)) << "\" y1=\"" << fmt(kTop) << "\" x2=\""
        << fmt(px(*plot.vline)) << "\" y2=\"" << fmt(kTop + ph)
        << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  }

  std::size_t entry = 0;
  auto legend = [&](const std::string& name, const char* colour, bool line) {
    const double ly = kTop + 10 + 18.0 * static_cast<double>(entry++);
    const double lx = kLeft + pw + 14;
    if (line) {
      svg << "<line class=\"legend\" x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\""
          << fmt(lx + 20) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << colour
          << "\" stroke-width=\"2\"/>\n";
    } else {
      svg << "<circle class=\"legend\" cx=\"" << fmt(lx + 10) << "\" cy=\"" << fmt(ly)
          << "\" r=\"3.5\" fill=\"" << colour << "\"/>\n";
    }
    svg << "<text x=\"" << fmt(lx + 26) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(name)
        << "</text>\n";
  };

  std::size_t colour = 0;
  for (const auto& s : plot.series) {
    const char* c = kPalette[colour++ % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < plot.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(plot.x[i])) continue;
      svg << (first ? "" : " ") << fmt(px(plot.x[i])) << ',' << fmt(py(s.y[i]));
      first = false;
    }
    svg << "\"/>\n";
    legend(s.name, c, true);
  }
  for (const auto& m : plot.markers) {
    const char* c = kPalette[colour++ % std::size(kPalette)];
    svg << "<g fill=\"" << c << "\">\n";
    for (std::size_t i = 0; i < m.x.size(); ++i) {
      svg << "<circle cx=\"" << fmt(px(m.x[i])) << "\" cy=\"" << fmt(py(m.y[i]))
          << "\" r=\"3.5\"/>\n";
    }
    svg << "</g>\n";
    legend(m.name, c, false);
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const PlotData& plot, const std::filesystem::path& path) {
  const auto text = render_svg(plot);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write plot " + path.string());
  out << text;
}

void write_plot_csv(std::ostream& out, const PlotData& plot) {
  check(plot);
  out << "x";
  for (const auto& s : plot.series) out << ',' << s.name;
  out << '\n';
  for (std::size_t i = 0; i < plot.x.size(); ++i) {
    out << detail::Num{plot.x[i]};
    for (const auto& s : plot.series) out << ',' << detail::Num{s.y[i]};
    out << '\n';
  }
}

}  // namespace tgrowth::plot
