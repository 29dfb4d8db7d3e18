#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "tgrowth/errors.hpp"
#include "tgrowth/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tgrowth;

namespace {

struct Options {
  std::string config_path;
  std::optional<int> subject;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::string model = "all";
};

pipeline::RunConfig load_config(const Options& o) {
  pipeline::RunConfig c;
  if (!o.config_path.empty()) c = pipeline::RunConfig::load(o.config_path);
  if (o.out) c.output_dir = *o.out;
  if (o.seed) c.set_seed(*o.seed);
  if (o.subject) c.subjects = {*o.subject};
  return c;
}

int require_subject(const Options& o) {
  if (!o.subject) throw DomainError("--subject is required");
  return *o.subject;
}

// Runs `body` and turns any exception into a "[stage] message" diagnostic.
template <class F>
int guarded(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::cerr << "tgrowth: [" << stage << "] " << e.what() << '\n';
    return 1;
  }
}

void print_recovery(int subject, const std::string& tag, const pipeline::Recovery& r) {
  std::cout << "subject " << subject << " " << tag << ": " << r.expression << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tumor growth modelling: Gompertz, Neural ODE and UDE fits, forecasts, symbolic recovery"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--subject", o.subject, "Subject id");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Random seed for network initialisation");
  };

  auto* interpolate = app.add_subcommand("interpolate", "Fit the sigmoid interpolant and write collocation points");
  auto* gompertz = app.add_subcommand("gompertz", "Solve the Gompertz baseline");
  auto* train_node = app.add_subcommand("train-node", "Train the Neural ODE");
  auto* train_ude = app.add_subcommand("train-ude", "Train the UDE");
  auto* forecast = app.add_subcommand("forecast", "Run the train/test forecast suite");
  auto* recover = app.add_subcommand("recover", "Recover sparse dynamics from trained models");
  auto* run_all = app.add_subcommand("run-all", "Run every stage for every configured subject");
  for (auto* sub : {interpolate, gompertz, train_node, train_ude, forecast, recover, run_all}) add_common(sub);
  recover->add_option("--model", o.model, "Model to recover from")
      ->check(CLI::IsMember({"all", "node", "ude", "gompertz"}));

  CLI11_PARSE(app, argc, argv);

  pipeline::RunConfig config;
  if (int rc = guarded("config", [&] {
        config = load_config(o);
        if (!run_all->parsed()) {
          require_subject(o);
          config.validate();
        }
        return 0;
      })) {
    return rc;
  }

  auto prepare = [&](const std::string& stage) {
    std::optional<pipeline::SubjectData> subject;
    fs::path dir;
    const int rc = guarded(stage, [&] {
      subject = pipeline::prepare_subject(config, require_subject(o));
      dir = pipeline::subject_dir(config, subject->series.subject_id);
      fs::create_directories(dir);
      return 0;
    });
    return std::tuple{rc, std::move(subject), dir};
  };

  if (interpolate->parsed()) {
    auto [rc, s, dir] = prepare("interpolate");
    if (rc) return rc;
    return guarded("interpolate", [&] {
      pipeline::stage_interpolate(*s, dir);
      std::cout << "wrote " << (dir / "interpolant.csv").string() << '\n';
      return 0;
    });
  }
  if (gompertz->parsed()) {
    auto [rc, s, dir] = prepare("gompertz");
    if (rc) return rc;
    return guarded("gompertz", [&] {
      std::cout << "gompertz loss " << pipeline::stage_gompertz(config, *s, dir) << '\n';
      return 0;
    });
  }
  for (auto [sub, kind] : {std::pair{train_node, models::ModelKind::neural_ode},
                           std::pair{train_ude, models::ModelKind::ude}}) {
    if (!sub->parsed()) continue;
    const std::string stage = sub->get_name();
    auto [rc, s, dir] = prepare(stage);
    if (rc) return rc;
    return guarded(stage, [&] {
      const auto r = pipeline::stage_train(config, *s, kind, dir);
      std::cout << models::to_string(kind) << " loss " << r.report.initial_loss << " -> "
                << r.report.final_loss << '\n';
      return 0;
    });
  }
  if (forecast->parsed()) {
    auto [rc, s, dir] = prepare("forecast");
    if (rc) return rc;
    return guarded("forecast", [&] {
      const auto rows = pipeline::stage_forecast(config, *s, dir);
      forecast::write_suite_csv(std::cout, rows);
      for (const auto& row : rows) {
        if (!row.ok()) throw Error("cell " + std::string(models::to_string(row.variant)) + " " +
                                   std::to_string(row.fraction) + ": " + row.error);
      }
      return 0;
    });
  }
  if (recover->parsed()) {
    auto [rc, s, dir] = prepare("recover");
    if (rc) return rc;
    return guarded("recover", [&] {
      if (o.model == "gompertz") {
        const auto cfg = pipeline::train_config_for(config, *s, models::ModelKind::gompertz);
        const auto model = models::make_model(models::ModelKind::gompertz, cfg);
        print_recovery(s->series.subject_id, "gompertz",
                       pipeline::stage_recover(config, *s, model, "gompertz", dir));
        return 0;
      }
      for (const std::string tag : {"node", "ude"}) {
        if (o.model != "all" && o.model != tag) continue;
        const auto model = pipeline::load_trained(dir, tag);
        print_recovery(s->series.subject_id, tag, pipeline::stage_recover(config, *s, model, tag, dir));
      }
      return 0;
    });
  }

  return guarded("run-all", [&] {
    config.resolve_subjects();
    const auto report = pipeline::run_all(config, &std::clog);
    for (const auto& s : report.subjects) {
      if (s.node_recovery) print_recovery(s.subject, "node", *s.node_recovery);
      if (s.ude_recovery) print_recovery(s.subject, "ude", *s.ude_recovery);
      for (const auto& [stage, msg] : s.errors) {
        std::cerr << "tgrowth: [subject " << s.subject << "/" << stage << "] " << msg << '\n';
      }
    }
    for (const auto& [id, msg] : report.failures) {
      std::cerr << "tgrowth: [subject " << id << "] " << msg << '\n';
    }
    return report.ok() ? 0 : 1;
  });
}
