#include "tgrowth/forecast.hpp"
#include "numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace tgrowth::forecast {
namespace {

// Collocation taus are i/(n-1); absorb the rounding of fractions like 0.9.
constexpr double kSplitSlack = 1e-12;

}  // namespace

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train fraction must lie in (0, 1)");
  }
  if (n_collocation < 2) throw DomainError("n_collocation must be >= 2");
}

Partition split(std::span<const models::Sample> data, const SplitSpec& spec) {
  spec.validate();
  Partition p;
  for (const auto& s : data) {
    (s.tau <= spec.train_fraction + kSplitSlack ? p.train : p.test).push_back(s);
  }
  if (p.train.empty() || p.test.empty()) {
    throw DomainError("train fraction " + std::to_string(spec.train_fraction) +
                      " leaves an empty partition");
  }
  return p;
}

ForecastResult run_forecast(models::ModelKind kind, std::span<const models::Sample> data,
                            const SplitSpec& spec, const models::TrainConfig& config) {
  return run_forecast(models::make_model(kind, config), data, spec, config);
}

ForecastResult run_forecast(models::DynamicsModel initial, std::span<const models::Sample> data,
                            const SplitSpec& spec, const models::TrainConfig& config) {
  const auto parts = split(data, spec);
  if (parts.train.size() < 2) throw DomainError("forecast needs at least 2 training samples");

  auto trained = models::train(std::move(initial), parts.train, config);
  ForecastResult out;
  out.report = std::move(trained.report);
  out.model = std::move(trained.model);
  out.train_loss = out.report.final_loss;
  out.split_tau = parts.train.back().tau;

  const double tau0 = data.front().tau;
  const double tau1 = data.back().tau;
  out.trajectory = models::solve(out.model, data.front().v, tau0, tau1,
                                 models::steps_for_span(config.solver_steps, tau1 - tau0));
  double sum = 0.0;
  for (const auto& s : parts.test) {
    const double r = ode::eval_at(out.trajectory, s.tau) - s.v;
    sum += r * r;
  }
  out.test_mse = sum / static_cast<double>(parts.test.size());
  return out;
}

std::vector<SuiteRow> forecast_suite(int subject, std::span<const models::Sample> data,
                                     std::span<const VariantConfig> variants,
                                     std::span<const double> fractions,
                                     std::size_t n_collocation) {
  std::vector<SuiteRow> rows;
  for (const auto& vc : variants) {
    for (double fraction : fractions) {
      SuiteRow row;
      row.subject = subject;
      row.variant = vc.variant;
      row.fraction = fraction;
      try {
        row.result = run_forecast(vc.variant, data, SplitSpec{fraction, n_collocation}, vc.config);
        row.train_loss = row.result.train_loss;
        row.test_mse = row.result.test_mse;
      } catch (const std::exception& e) {
        row.error = e.what();
        row.train_loss = row.test_mse = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(std::move(row));
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SuiteRow& a, const SuiteRow& b) {
    if (a.variant != b.variant) return a.variant < b.variant;
    return a.fraction < b.fraction;
  });
  return rows;
}

void write_suite_csv(std::ostream& out, std::span<const SuiteRow> rows, bool header) {
  if (header) out << "subject,variant,fraction,train_loss,test_mse\n";
  for (const auto& r : rows) {
    out << r.subject << ',' << models::to_string(r.variant) << ',' << detail::Num{r.fraction} << ','
        << detail::Num{r.ok() ? r.train_loss : NAN} << ',' << detail::Num{r.ok() ? r.test_mse : NAN} << '\n';
  }
}

void write_cell_csv(std::ostream& out, std::span<const models::Sample> data,
                    const ForecastResult& result) {
  out << "tau,v_true,v_pred,is_test\n";
  for (const auto& s : data) {
    out << detail::Num{s.tau} << ',' << detail::Num{s.v} << ',' << detail::Num{ode::eval_at(result.trajectory, s.tau)} << ','
        << (s.tau > result.split_tau ? 1 : 0) << '\n';
  }
}

}  // namespace tgrowth::forecast
