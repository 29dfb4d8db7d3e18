#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace tgrowth::data {

/// One subject's measurements: days and caliper volumes in mm^3.
struct TumorSeries {
  int subject_id = 0;
  std::vector<double> times;
  std::vector<double> volumes;

  std::size_t size() const noexcept { return times.size(); }
};

/// Throws DomainError unless times are strictly increasing, volumes are
/// positive, both have equal length and there are at least four points.
void validate(const TumorSeries& series);

/// Ellipsoid volume from the largest (length) and smallest (width) caliper
/// diameters, V = (pi/6) * width^2 * length. Requires length >= width >= 0.
double volume_from_calipers(double length_mm, double width_mm);

/// Reads subject rows from a CSV with header `id,time_days,volume_mm3`.
/// Lines starting with '#' and blank lines are skipped. Rows are returned
/// sorted by time; duplicated time points are rejected.
TumorSeries load_series(const std::filesystem::path& path, int subject_id);
TumorSeries load_series(std::istream& in, int subject_id);

/// Distinct subject ids in file order.
std::vector<int> list_subjects(const std::filesystem::path& path);

/// Affine min-max scalers between physical (days, mm^3) and [0,1].
class NormalizationMap {
 public:
  NormalizationMap(double t_min, double t_max, double v_min, double v_max);

  /// Time range from the first/last sample, volume range from min/max.
  static NormalizationMap from_series(const TumorSeries& series);

  double t_min() const noexcept { return t_min_; }
  double t_max() const noexcept { return t_max_; }
  double v_min() const noexcept { return v_min_; }
  double v_max() const noexcept { return v_max_; }
  double time_span() const noexcept { return t_max_ - t_min_; }
  double volume_span() const noexcept { return v_max_ - v_min_; }

  double normalize_time(double t) const noexcept { return (t - t_min_) / time_span(); }
  double denormalize_time(double tau) const noexcept { return t_min_ + tau * time_span(); }
  double normalize_volume(double v) const noexcept { return (v - v_min_) / volume_span(); }
  double denormalize_volume(double x) const noexcept { return v_min_ + x * volume_span(); }

 private:
  double t_min_, t_max_, v_min_, v_max_;
};

inline NormalizationMap make_norm_map(const TumorSeries& series) {
  return NormalizationMap::from_series(series);
}

/// Four-parameter logistic V(tau) = A + B / (1 + exp(-k (tau - tau0))) over
/// normalized time. A and B are in mm^3.
struct SigmoidFit {
  double A = 0.0;
  double B = 0.0;
  double k = 0.0;
  double tau0 = 0.0;
  double sse = 0.0;
  int iterations = 0;

  double operator()(double tau) const noexcept;
};

struct SigmoidOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-15;
  double initial_k = 10.0;
  double initial_tau0 = 0.5;
};

/// Levenberg-Marquardt least squares of the logistic against the series with
/// time normalized through `map`. Throws FitError on non-convergence, on a
/// constant series, or when the optimum violates B > 0, k > 0, 0 <= tau0 <= 1.
SigmoidFit fit_sigmoid(const TumorSeries& series, const NormalizationMap& map,
                       const SigmoidOptions& options = {});

struct InterpolantSample {
  double tau;
  double time_days;
  double volume_mm3;
};

/// n >= 2 points uniform in tau over [0,1].
std::vector<InterpolantSample> sample_interpolant(const SigmoidFit& fit,
                                                  const NormalizationMap& map,
                                                  std::size_t n);

/// CSV with header `tau,time_days,volume_mm3`.
void write_interpolant_csv(std::ostream& out, const std::vector<InterpolantSample>& samples);

}  // namespace tgrowth::data
