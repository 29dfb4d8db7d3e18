// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures. argv[1] is the path of the tgrowth executable.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tgrowth/autodiff.hpp"
#include "tgrowth/dataio.hpp"
#include "tgrowth/forecast.hpp"
#include "tgrowth/models.hpp"
#include "tgrowth/odeint.hpp"
#include "tgrowth/pipeline.hpp"
#include "tgrowth/symrec.hpp"

using namespace tgrowth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  char buf[64];
  std::snprintf(buf, sizeof buf, " [%.2f s]", secs);
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail
            << buf << std::endl;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Subject 1 of the bundled data: the 21-point interpolated training set.
struct Fixture {
  pipeline::RunConfig config;
  pipeline::SubjectData subject;
};

Fixture make_fixture() {
  pipeline::RunConfig c;
  c.data_path = TGROWTH_DATA_FILE;
  c.subjects = {1};
  auto s = pipeline::prepare_subject(c, 1);
  return {std::move(c), std::move(s)};
}

std::string describe(const symrec::SparseFit& f) {
  std::string active = "{";
  for (std::size_t i = 0; i < f.active_set.size(); ++i) {
    active += (i ? "," : "") + std::string("phi") + std::to_string(f.active_set[i] + 1);
  }
  active += "}";
  return active + fmt(" beta=(%.4g, %.4g, %.4g, %.4g)", f.beta[0], f.beta[1], f.beta[2], f.beta[3]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "tgrowth";

  report(1, "RK4 vs closed-form Gompertz", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const ode::GompertzParams p{0.3, 1200.0};
    const ode::ScalarField f = [p](double, double v) { return ode::gompertz_rhs(v, p); };
    const auto tr = ode::integrate_rk4(f, 50.0, 0.0, 10.0, 1000);
    double worst = 0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double exact = ode::gompertz_exact(tr.times[i], 50.0, p);
      worst = std::max(worst, std::abs(tr.states[i] - exact) / exact);
    }
    auto endpoint_error = [&](std::size_t n) {
      return std::abs(ode::integrate_rk4(f, 50.0, 0.0, 10.0, n).back() - ode::gompertz_exact(10.0, 50.0, p));
    };
    const double e1 = endpoint_error(25), e2 = endpoint_error(50), e3 = endpoint_error(100);
    const double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
    const double secs = seconds_since(t0);
    const bool ok = worst <= 1e-8 && std::abs(o1 - 4.0) <= 0.2 && std::abs(o2 - 4.0) <= 0.2 && secs < 1.0;
    return Outcome{ok, fmt("max rel err %.3g (<= 1e-8), orders %.3f, %.3f (4.0 +/- 0.2)", worst, o1, o2)};
  });

  report(2, "gradient vs central differences", [] {
    const auto t0 = std::chrono::steady_clock::now();
    // A 10-step unrolled RK4 solve over the unit span; 11 targets on its nodes.
    std::vector<models::Sample> data;
    for (int i = 0; i <= 10; ++i) data.push_back({i / 10.0, 0.1 + 0.8 / (1 + std::exp(-8 * (i / 10.0 - 0.5)))});
    auto cfg = models::TrainConfig::neural_ode_defaults();
    cfg.hidden = {10, 10};
    cfg.solver_steps = 10;
    double worst = 0, worst_tape = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      cfg.seed = seed;
      const auto model = models::make_model(models::ModelKind::neural_ode, cfg);
      const auto g = models::loss_and_gradient(model, data, cfg).gradient;
      const auto tape = ad::grad(
          [&](ad::Tape&, std::span<const ad::Var> th) { return models::loss_on_tape(model, th, data, cfg); },
          models::parameters(model));
      auto theta = models::parameters(model);
      auto work = model;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double h = 1e-6;
        auto t = theta;
        t[i] += h;
        models::set_parameters(work, t);
        const double plus = models::loss(work, data, cfg);
        t[i] -= 2 * h;
        models::set_parameters(work, t);
        const double fd = (plus - models::loss(work, data, cfg)) / (2 * h);
        const double scale = std::max({std::abs(g[i]), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(g[i] - fd) / scale);
        worst_tape = std::max(worst_tape, std::abs(tape[i] - fd) / std::max({std::abs(tape[i]), std::abs(fd), 1e-6}));
      }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 1e-5 && worst_tape <= 1e-5 && secs < 10.0;
    return Outcome{ok, fmt("20 seeds, arch [1,10,10,1]: max rel err %.3g (adjoint), %.3g (tape) (<= 1e-5)",
                           worst, worst_tape)};
  });

  const auto fx = make_fixture();
  std::optional<models::TrainResult> node, ude;

  report(3, "Neural ODE fit", [&] {
    node = models::train(models::ModelKind::neural_ode, fx.subject.samples,
                         pipeline::train_config_for(fx.config, fx.subject, models::ModelKind::neural_ode));
    const auto& r = node->report;
    const double orders = std::log10(r.initial_loss / r.final_loss);
    const bool ok = r.final_loss <= 1e-2 && orders >= 3.0 && r.loss_history.size() == 500;
    return Outcome{ok, fmt("loss %.4g -> %.4g over 500 epochs, %.2f orders (<= 1e-2, >= 3 orders)",
                           r.initial_loss, r.final_loss, orders)};
  });

  report(4, "UDE fit", [&] {
    ude = models::train(models::ModelKind::ude, fx.subject.samples,
                        pipeline::train_config_for(fx.config, fx.subject, models::ModelKind::ude));
    const auto& r = ude->report;
    const double orders = std::log10(r.initial_loss / r.final_loss);
    const bool ok = r.final_loss <= 5e-2 && orders >= 3.0;
    return Outcome{ok, fmt("loss %.4g -> %.4g over 2500 epochs, %.2f orders (<= 5e-2, >= 3 orders)",
                           r.initial_loss, r.final_loss, orders)};
  });

  report(5, "forecast pattern", [&] {
    auto run = [&](models::ModelKind kind, double fraction) {
      return forecast::run_forecast(kind, fx.subject.samples, {fraction, 21},
                                    pipeline::train_config_for(fx.config, fx.subject, kind))
          .test_mse;
    };
    const double ude90 = run(models::ModelKind::ude, 0.9);
    const double ude70 = run(models::ModelKind::ude, 0.7);
    const double node90 = run(models::ModelKind::neural_ode, 0.9);
    const bool ok = ude70 >= ude90 && node90 <= 0.1;
    return Outcome{ok, fmt("UDE test MSE 70-30 %.4g >= 90-10 %.4g; Neural ODE 90-10 %.4g (<= 0.1)", ude70,
                           ude90, node90)};
  });

  report(6, "sparse regression oracle", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const symrec::BasisSet basis{1200.0};
    std::vector<symrec::PhysicalSample> samples;
    for (int i = 0; i <= 100; ++i) {
      const double V = 50.0 + 11.0 * i;
      samples.push_back({V, -7.88 * basis.evaluate(1, V) + 11.1 * basis.evaluate(2, V)});
    }
    const auto dm = symrec::build_design_matrix(samples, basis);
    const auto fit = symrec::sparse_regress(dm.phi, dm.y);
    const double e2 = std::abs(fit.beta[1] + 7.88) / 7.88, e3 = std::abs(fit.beta[2] - 11.1) / 11.1;
    const double secs = seconds_since(t0);
    const bool ok = e2 <= 0.01 && e3 <= 0.01 && fit.beta[0] == 0.0 && fit.beta[3] == 0.0 && secs < 1.0;
    return Outcome{ok, describe(fit) + fmt(", rel err %.2e / %.2e (<= 1%%)", e2, e3)};
  });

  report(7, "sign structure from trained models", [&] {
    if (!node || !ude) return Outcome{false, "trained models unavailable"};
    bool ok = true;
    std::string detail;
    for (const auto& [tag, model] : {std::pair{"node", &node->model}, std::pair{"ude", &ude->model}}) {
      const auto rec = pipeline::stage_recover(fx.config, fx.subject, *model, tag,
                                               fs::temp_directory_path());
      const auto& b = rec.fit.beta;
      const bool active = rec.fit.active_set == std::vector<std::size_t>{1, 2};
      const bool signs = b[1] < 0 && 0 < b[2] && std::abs(b[2]) > std::abs(b[1]);
      ok = ok && active && signs;
      detail += std::string(detail.empty() ? "" : "; ") + tag + ": " + describe(rec.fit) +
                (active ? "" : " [active set != {phi2,phi3}]") + (signs ? "" : " [sign pattern violated]");
    }
    return Outcome{ok, detail};
  });

  report(8, "Gompertz self-identification", [&] {
    const auto cfg = pipeline::train_config_for(fx.config, fx.subject, models::ModelKind::gompertz);
    const auto model = models::make_model(models::ModelKind::gompertz, cfg);
    const auto samples = symrec::sample_physical_derivatives(model, fx.subject.map, fx.subject.v0(), 101);
    const auto dm = symrec::build_design_matrix(samples, symrec::BasisSet{1200.0});
    const auto fit = symrec::sparse_regress(dm.phi, dm.y);
    const bool subset = std::all_of(fit.active_set.begin(), fit.active_set.end(), [](auto j) { return j == 1; });
    const double err = std::abs(fit.beta[1] - 0.3) / 0.3;
    return Outcome{subset && err <= 0.02, describe(fit) + fmt(", growth rate error %.3g%% (<= 2%%)", 100 * err)};
  });

  report(9, "run-all determinism", [&] {
    const auto root = fs::temp_directory_path() / "tgrowth_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    {
      std::ofstream ini(root / "config.ini");
      ini << "[data]\npath = " << TGROWTH_DATA_FILE << "\nsubjects = 1\n";
    }
    for (const char* run : {"a", "b"}) {
      const std::string cmd = "\"" + cli + "\" run-all --config \"" + (root / "config.ini").string() +
                              "\" --out \"" + (root / run).string() + "\" > \"" +
                              (root / (std::string(run) + ".log")).string() + "\" 2>&1";
      if (std::system(cmd.c_str()) != 0) return Outcome{false, std::string("run-all ") + run + " failed"};
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
      if (entry.path().extension() != ".csv") continue;
      const auto twin = root / "b" / fs::relative(entry.path(), root / "a");
      if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) {
        return Outcome{false, "differs: " + fs::relative(entry.path(), root / "a").string()};
      }
      ++compared;
    }
    const bool ok = compared > 0 && slurp(root / "a/subject_1/summary.json") == slurp(root / "b/subject_1/summary.json");
    return Outcome{ok, std::to_string(compared) + " CSV files and summary.json byte-identical across two runs"};
  });

  std::cout << (failures ? std::to_string(failures) + " criterion/criteria failed" : "all criteria passed")
            << std::endl;
  return failures;
}
