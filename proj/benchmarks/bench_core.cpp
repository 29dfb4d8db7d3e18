#include <benchmark/benchmark.h>

#include <cmath>

#include "tgrowth/dataio.hpp"
#include "tgrowth/models.hpp"
#include "tgrowth/neuralnet.hpp"
#include "tgrowth/odeint.hpp"
#include "tgrowth/symrec.hpp"

using namespace tgrowth;

namespace {

std::vector<models::Sample> subject_samples() {
  const auto series = data::load_series(TGROWTH_DATA_FILE, 1);
  const auto map = data::make_norm_map(series);
  const auto fit = data::fit_sigmoid(series, map);
  std::vector<models::Sample> out;
  for (const auto& p : data::sample_interpolant(fit, map, 21)) {
    out.push_back({p.tau, map.normalize_volume(p.volume_mm3)});
  }
  return out;
}

void BM_Rk4Gompertz(benchmark::State& state) {
  const ode::GompertzParams p{0.3, 1200.0};
  const ode::ScalarField f = [p](double, double v) { return ode::gompertz_rhs(v, p); };
  for (auto _ : state) benchmark::DoNotOptimize(ode::integrate_rk4(f, 50.0, 0.0, 10.0, state.range(0)));
}
BENCHMARK(BM_Rk4Gompertz)->Arg(100)->Arg(1000);

void BM_MlpForwardPullback(benchmark::State& state) {
  const auto arch = nn::MLPArch::with_hidden(1, {128, 128, 64, 64}, 1);
  const auto p = nn::init_params(arch, 123);
  nn::MLPTrace trace(arch);
  std::vector<double> grad(p.theta.size());
  const double x[] = {0.4}, cot[] = {1.0};
  for (auto _ : state) {
    trace.run(p.theta, x);
    benchmark::DoNotOptimize(trace.pullback(p.theta, cot, grad));
  }
}
BENCHMARK(BM_MlpForwardPullback);

void BM_LossAndGradient(benchmark::State& state) {
  const auto data = subject_samples();
  const auto kind = state.range(0) ? models::ModelKind::ude : models::ModelKind::neural_ode;
  const auto cfg = state.range(0) ? models::TrainConfig::ude_defaults() : models::TrainConfig::neural_ode_defaults();
  const auto model = models::make_model(kind, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(models::loss_and_gradient(model, data, cfg));
  state.SetLabel(std::string(models::to_string(kind)));
}
BENCHMARK(BM_LossAndGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SparseRegress(benchmark::State& state) {
  const symrec::BasisSet basis{1200.0};
  std::vector<symrec::PhysicalSample> samples;
  for (int i = 0; i <= 100; ++i) {
    const double V = 50.0 + 11.0 * i;
    samples.push_back({V, -7.88 * basis.evaluate(1, V) + 11.1 * basis.evaluate(2, V)});
  }
  const auto dm = symrec::build_design_matrix(samples, basis);
  for (auto _ : state) benchmark::DoNotOptimize(symrec::sparse_regress(dm.phi, dm.y));
}
BENCHMARK(BM_SparseRegress)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
