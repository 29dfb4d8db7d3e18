#pragma once

#include <cmath>
#include <vector>

#include "tgrowth/dataio.hpp"
#include "tgrowth/models.hpp"

namespace tgtest {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// 21 collocation points from the sigmoid interpolant of subject 1.
struct Subject {
  tgrowth::data::TumorSeries series;
  tgrowth::data::NormalizationMap map;
  tgrowth::data::SigmoidFit sigmoid;
  std::vector<tgrowth::models::Sample> samples;
};

inline Subject subject_one() {
  using namespace tgrowth;
  auto series = data::load_series(TGROWTH_DATA_FILE, 1);
  const auto map = data::make_norm_map(series);
  const auto sig = data::fit_sigmoid(series, map);
  std::vector<models::Sample> samples;
  for (const auto& p : data::sample_interpolant(sig, map, 21)) {
    samples.push_back({p.tau, map.normalize_volume(p.volume_mm3)});
  }
  return {std::move(series), map, sig, std::move(samples)};
}

}  // namespace tgtest
