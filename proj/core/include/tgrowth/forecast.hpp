#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgrowth/models.hpp"
#include "tgrowth/odeint.hpp"

namespace tgrowth::forecast {

struct SplitSpec {
  double train_fraction = 0.9;
  std::size_t n_collocation = 21;

  void validate() const;
};

struct Partition {
  std::vector<models::Sample> train;
  std::vector<models::Sample> test;
};

/// train = samples with tau <= train_fraction, test = the rest. DomainError
/// if either side would be empty.
Partition split(std::span<const models::Sample> data, const SplitSpec& spec);

struct ForecastResult {
  models::DynamicsModel model;
  models::TrainReport report;
  double train_loss = 0.0;
  double test_mse = 0.0;
  /// One solve over the whole normalized span from the shared v0.
  ode::Trajectory trajectory;
  double split_tau = 0.0;
};

/// Trains on the leading partition and forecasts the rest with one continuous solve.
ForecastResult run_forecast(models::ModelKind kind, std::span<const models::Sample> data,
                            const SplitSpec& spec, const models::TrainConfig& config);

/// Same, starting from an explicit untrained model.
ForecastResult run_forecast(models::DynamicsModel initial, std::span<const models::Sample> data,
                            const SplitSpec& spec, const models::TrainConfig& config);

struct SuiteRow {
  int subject = 0;
  models::ModelKind variant = models::ModelKind::neural_ode;
  double fraction = 0.0;
  double train_loss = 0.0;
  double test_mse = 0.0;
  /// Empty when the cell succeeded.
  std::string error;
  ForecastResult result;

  bool ok() const noexcept { return error.empty(); }
};

/// Training configuration per variant for a suite run.
struct VariantConfig {
  models::ModelKind variant;
  models::TrainConfig config;
};

/// Every (variant, fraction) cell, rows sorted by (variant, fraction). A
/// failing cell is recorded and the suite continues.
std::vector<SuiteRow> forecast_suite(int subject, std::span<const models::Sample> data,
                                     std::span<const VariantConfig> variants,
                                     std::span<const double> fractions,
                                     std::size_t n_collocation = 21);

/// CSV `subject,variant,fraction,train_loss,test_mse` (failed cells print nan).
void write_suite_csv(std::ostream& out, std::span<const SuiteRow> rows, bool header = true);

/// CSV `tau,v_true,v_pred,is_test` over the collocation points.
void write_cell_csv(std::ostream& out, std::span<const models::Sample> data,
                    const ForecastResult& result);

}  // namespace tgrowth::forecast
