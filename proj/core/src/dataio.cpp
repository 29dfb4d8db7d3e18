#include "tgrowth/dataio.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "tgrowth/errors.hpp"
#include "numfmt.hpp"

namespace tgrowth::data {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <class T>
T parse_number(std::string_view field, const char* column, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("cannot parse " + std::string(column) + " value '" + std::string(field) + "'",
                     line_no);
  }
  return value;
}

struct Row {
  int id;
  double time;
  double volume;
  std::size_t line;
};

// Visits every data row; header is checked, comments and blanks skipped.
template <class Visitor>
void read_rows(std::istream& in, Visitor&& visit) {
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "id" || fields[1] != "time_days" ||
          fields[2] != "volume_mm3") {
        throw ParseError("expected header 'id,time_days,volume_mm3'", line_no);
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) {
      throw ParseError("expected 3 fields, found " + std::to_string(fields.size()), line_no);
    }
    visit(Row{parse_number<int>(fields[0], "id", line_no),
              parse_number<double>(fields[1], "time_days", line_no),
              parse_number<double>(fields[2], "volume_mm3", line_no), line_no});
  }
  if (!header_seen) throw ParseError("missing header 'id,time_days,volume_mm3'", 0);
}

std::ifstream open_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open data file " + path.string());
  return in;
}

double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate(const TumorSeries& series) {
  if (series.times.size() != series.volumes.size()) {
    throw DomainError("series times and volumes differ in length");
  }
  if (series.size() < 4) {
    throw DomainError("series of subject " + std::to_string(series.subject_id) +
                      " has fewer than 4 points");
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!std::isfinite(series.times[i]) || !std::isfinite(series.volumes[i])) {
      throw DomainError("series contains a non-finite value");
    }
    if (series.volumes[i] <= 0.0) throw DomainError("series volumes must be positive");
    if (i > 0 && series.times[i] <= series.times[i - 1]) {
      throw DomainError("series times must be strictly increasing");
    }
  }
}

double volume_from_calipers(double length_mm, double width_mm) {
  if (length_mm < 0.0 || width_mm < 0.0) throw DomainError("caliper diameters must be >= 0");
  if (width_mm > length_mm) throw DomainError("caliper width exceeds length");
  return std::numbers::pi / 6.0 * width_mm * width_mm * length_mm;
}

TumorSeries load_series(std::istream& in, int subject_id) {
  std::vector<Row> rows;
  read_rows(in, [&](const Row& row) {
    if (row.id == subject_id) rows.push_back(row);
  });
  if (rows.empty()) throw NotFoundError("subject " + std::to_string(subject_id) + " not found");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.time < b.time; });
  TumorSeries series;
  series.subject_id = subject_id;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].time == rows[i - 1].time) {
      throw ParseError("duplicated time point " + std::to_string(rows[i].time) +
                           " for subject " + std::to_string(subject_id) + " (first seen on line " +
                           std::to_string(rows[i - 1].line) + ")",
                       rows[i].line);
    }
    series.times.push_back(rows[i].time);
    series.volumes.push_back(rows[i].volume);
  }
  validate(series);
  return series;
}

TumorSeries load_series(const std::filesystem::path& path, int subject_id) {
  auto in = open_csv(path);
  return load_series(in, subject_id);
}

std::vector<int> list_subjects(const std::filesystem::path& path) {
  auto in = open_csv(path);
  std::vector<int> ids;
  read_rows(in, [&](const Row& row) {
    if (std::find(ids.begin(), ids.end(), row.id) == ids.end()) ids.push_back(row.id);
  });
  return ids;
}

NormalizationMap::NormalizationMap(double t_min, double t_max, double v_min, double v_max)
    : t_min_(t_min), t_max_(t_max), v_min_(v_min), v_max_(v_max) {
  if (!(t_max > t_min)) throw DomainError("normalization needs t_max > t_min");
  if (!(v_max > v_min)) throw DomainError("normalization needs v_max > v_min");
}

NormalizationMap NormalizationMap::from_series(const TumorSeries& series) {
  if (series.times.empty() || series.volumes.empty()) {
    throw DomainError("cannot normalize an empty series");
  }
  const auto [vmin, vmax] = std::minmax_element(series.volumes.begin(), series.volumes.end());
  return NormalizationMap(series.times.front(), series.times.back(), *vmin, *vmax);
}

double SigmoidFit::operator()(double tau) const noexcept {
  return A + B * logistic(k * (tau - tau0));
}

SigmoidFit fit_sigmoid(const TumorSeries& series, const NormalizationMap& map,
                       const SigmoidOptions& options) {
  const std::size_t n = series.size();
  if (n < 4) throw DomainError("sigmoid fit needs at least 4 points");

  const auto [vmin_it, vmax_it] = std::minmax_element(series.volumes.begin(), series.volumes.end());
  const double vmin = *vmin_it;
  const double scale = *vmax_it - vmin;
  if (!(scale > 0.0)) {
    throw FitError("constant volume series has no sigmoid shape", {vmin, 0.0, 0.0, 0.0}, {});
  }

  // Work in volume units of the series range so tolerances are scale free.
  Eigen::VectorXd tau(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    tau[i] = map.normalize_time(series.times[i]);
    y[i] = series.volumes[i] / scale;
  }

  Eigen::Vector4d p(vmin / scale, 1.0, options.initial_k, options.initial_tau0);
  Eigen::VectorXd r(n);
  Eigen::Matrix<double, Eigen::Dynamic, 4> J(n, 4);

  auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& out) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = q[0] + q[1] * logistic(q[2] * (tau[i] - q[3])) - y[i];
    }
    return out.squaredNorm();
  };
  auto jacobian = [&](const Eigen::Vector4d& q) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = logistic(q[2] * (tau[i] - q[3]));
      const double ds = q[1] * s * (1.0 - s);
      J(i, 0) = 1.0;
      J(i, 1) = s;
      J(i, 2) = ds * (tau[i] - q[3]);
      J(i, 3) = -ds * q[2];
    }
  };

  auto to_fit = [&](const Eigen::Vector4d& q, double sse_scaled, int iters) {
    return SigmoidFit{q[0] * scale, q[1] * scale, q[2], q[3], sse_scaled * scale * scale, iters};
  };

  double sse = residuals(p, r);
  double damping = 1e-3;
  std::vector<double> history;
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    jacobian(p);
    const Eigen::Vector4d g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      converged = true;
      break;
    }
    const Eigen::Matrix4d JtJ = J.transpose() * J;

    bool stepped = false;
    for (int attempt = 0; attempt < 50 && !stepped; ++attempt) {
      Eigen::Matrix4d A = JtJ;
      A.diagonal() += damping * JtJ.diagonal().cwiseMax(1e-12);
      const Eigen::Vector4d delta = A.ldlt().solve(-g);
      if (delta.norm() <= options.step_tolerance * (p.norm() + options.step_tolerance)) {
        converged = true;
        break;
      }
      const Eigen::Vector4d trial = p + delta;
      Eigen::VectorXd r_trial(n);
      const double sse_trial = residuals(trial, r_trial);
      if (std::isfinite(sse_trial) && sse_trial <= sse) {
        p = trial;
        r = r_trial;
        sse = sse_trial;
        damping = std::max(damping / 3.0, 1e-15);
        stepped = true;
      } else {
        damping *= 4.0;
      }
    }
    history.push_back(sse * scale * scale);
    if (converged) break;
    if (!stepped) {
      converged = true;  // no descent possible at working precision
      break;
    }
  }

  const SigmoidFit fit = to_fit(p, sse, iter);
  const std::vector<double> best{fit.A, fit.B, fit.k, fit.tau0};
  if (!converged) {
    throw FitError("sigmoid fit did not converge in " + std::to_string(options.max_iterations) +
                       " iterations",
                   best, history);
  }
  if (!(fit.B > 0.0) || !(fit.k > 0.0) || fit.tau0 < 0.0 || fit.tau0 > 1.0) {
    throw FitError("sigmoid fit is degenerate (needs B > 0, k > 0, 0 <= tau0 <= 1)", best,
                   history);
  }
  return fit;
}

std::vector<InterpolantSample> sample_interpolant(const SigmoidFit& fit,
                                                  const NormalizationMap& map, std::size_t n) {
  if (n < 2) throw DomainError("interpolant sampling needs n >= 2");
  std::vector<InterpolantSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back({tau, map.denormalize_time(tau), fit(tau)});
  }
  return out;
}

void write_interpolant_csv(std::ostream& out, const std::vector<InterpolantSample>& samples) {
  out << "tau,time_days,volume_mm3\n";
  using detail::Num;
  for (const auto& s : samples) {
    out << Num{s.tau} << ',' << Num{s.time_days} << ',' << Num{s.volume_mm3} << '\n';
  }
}

}  // namespace tgrowth::data
