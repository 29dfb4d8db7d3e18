#include "tgrowth/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "tgrowth/plot.hpp"
#include "numfmt.hpp"

namespace tgrowth::pipeline {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_value(const std::string& text, const std::string& key) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("config key '" + key + "': cannot parse '" + text + "'", 0);
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  throw ParseError("config key '" + key + "': expected a boolean, got '" + text + "'", 0);
}

std::vector<std::size_t> parse_widths(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_value<std::size_t>(item, key));
  if (out.empty()) throw ParseError("config key '" + key + "' is empty", 0);
  return out;
}

std::vector<models::Stage> parse_schedule(const std::string& text, const std::string& key) {
  std::vector<models::Stage> out;
  for (const auto& item : split_list(text)) {
    const auto parts = split_list(item, ':');
    if (parts.size() != 2) {
      throw ParseError("config key '" + key + "': stage '" + item + "' is not rate:epochs", 0);
    }
    out.push_back({parse_value<double>(parts[0], key), parse_value<std::size_t>(parts[1], key)});
  }
  return out;
}

std::string percent_label(double fraction) {
  const long train = std::lround(fraction * 100.0);
  return std::to_string(train) + "_" + std::to_string(100 - train);
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_plot_pair(const plot::PlotData& data, const fs::path& dir, const std::string& stem) {
  plot::emit_plot(data, dir / (stem + ".svg"));
  auto csv = open_out(dir / (stem + "_plot.csv"));
  plot::write_plot_csv(csv, data);
}

std::vector<double> times_of(const SubjectData& s) {
  std::vector<double> t;
  for (const auto& p : s.interpolant) t.push_back(p.time_days);
  return t;
}

std::vector<double> volumes_of(const SubjectData& s) {
  std::vector<double> v;
  for (const auto& p : s.interpolant) v.push_back(p.volume_mm3);
  return v;
}

ode::Trajectory physical_trajectory(const ode::Trajectory& normalized,
                                    const data::NormalizationMap& map) {
  ode::Trajectory out;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    out.times.push_back(map.denormalize_time(normalized.times[i]));
    out.states.push_back(map.denormalize_volume(normalized.states[i]));
  }
  return out;
}

plot::PlotData fit_plot(const SubjectData& subject, const ode::Trajectory& normalized,
                        const std::string& title, const std::string& model_name) {
  plot::PlotData p;
  p.title = title;
  p.x_label = "time (days)";
  p.y_label = "tumor volume (mm^3)";
  p.x = times_of(subject);
  p.series.push_back({"interpolated data", volumes_of(subject)});
  std::vector<double> pred;
  for (const auto& s : subject.samples) {
    pred.push_back(subject.map.denormalize_volume(ode::eval_at(normalized, s.tau)));
  }
  p.series.push_back({model_name, std::move(pred)});
  return p;
}

ordered_json report_json(const models::TrainReport& r) {
  return {{"initial_loss", r.initial_loss},
          {"final_loss", r.final_loss},
          {"final_loss_physical", r.final_loss_physical},
          {"epochs", r.loss_history.size()}};
}

ordered_json recovery_json(const Recovery& r) {
  return {{"expression", r.expression},
          {"beta", r.fit.beta},
          {"active_set", r.fit.active_set},
          {"lambda", r.fit.lambda},
          {"residual_norm", r.fit.residual_norm}};
}

}  // namespace

double SymrecSettings::capacity_for(int subject) const {
  const auto it = subject_K.find(subject);
  return it == subject_K.end() ? default_K : it->second;
}

RunConfig RunConfig::parse(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }

  const std::map<std::string, std::set<std::string>> known = {
      {"data", {"path", "subjects", "n_collocation"}},
      {"gompertz", {"a", "K"}},
      {"training", {"seed", "solver_steps", "time_input"}},
      {"node", {"hidden", "schedule"}},
      {"ude", {"hidden", "schedule"}},
      {"forecast", {"fractions"}},
      {"symrec", {"samples", "lambda", "sig_figs", "K", "subject_K"}},
      {"output", {"dir"}},
  };
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) {
      throw ParseError("unknown config section or top-level key '" + section + "'", 0);
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ParseError("unknown config key '" + section + "." + key + "'", 0);
    }
  }

  RunConfig c;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(path)) return trim(*v);
    return std::nullopt;
  };

  if (auto v = get("data.path")) c.data_path = *v;
  if (auto v = get("data.subjects")) {
    for (const auto& s : split_list(*v)) c.subjects.push_back(parse_value<int>(s, "data.subjects"));
  }
  if (auto v = get("data.n_collocation")) c.n_collocation = parse_value<std::size_t>(*v, "data.n_collocation");
  if (auto v = get("gompertz.a")) c.gompertz.a = parse_value<double>(*v, "gompertz.a");
  if (auto v = get("gompertz.K")) c.gompertz.K = parse_value<double>(*v, "gompertz.K");
  if (auto v = get("training.seed")) c.seed = parse_value<std::uint64_t>(*v, "training.seed");
  if (auto v = get("training.solver_steps")) {
    c.node.solver_steps = c.ude.solver_steps = parse_value<std::size_t>(*v, "training.solver_steps");
  }
  if (auto v = get("training.time_input")) c.node.time_input = parse_bool(*v, "training.time_input");
  if (auto v = get("node.hidden")) c.node.hidden = parse_widths(*v, "node.hidden");
  if (auto v = get("node.schedule")) c.node.schedule = parse_schedule(*v, "node.schedule");
  if (auto v = get("ude.hidden")) c.ude.hidden = parse_widths(*v, "ude.hidden");
  if (auto v = get("ude.schedule")) c.ude.schedule = parse_schedule(*v, "ude.schedule");
  if (auto v = get("forecast.fractions")) {
    c.fractions.clear();
    for (const auto& s : split_list(*v)) c.fractions.push_back(parse_value<double>(s, "forecast.fractions"));
  }
  if (auto v = get("symrec.samples")) c.symrec.samples = parse_value<std::size_t>(*v, "symrec.samples");
  if (auto v = get("symrec.lambda"); v && *v != "auto") c.symrec.lambda = parse_value<double>(*v, "symrec.lambda");
  if (auto v = get("symrec.sig_figs")) c.symrec.sig_figs = parse_value<int>(*v, "symrec.sig_figs");
  if (auto v = get("symrec.K")) c.symrec.default_K = parse_value<double>(*v, "symrec.K");
  if (auto v = get("symrec.subject_K")) {
    for (const auto& item : split_list(*v)) {
      const auto parts = split_list(item, ':');
      if (parts.size() != 2) throw ParseError("symrec.subject_K entries must be id:K", 0);
      c.symrec.subject_K[parse_value<int>(parts[0], "symrec.subject_K")] =
          parse_value<double>(parts[1], "symrec.subject_K");
    }
  }
  if (auto v = get("output.dir")) c.output_dir = *v;
  c.set_seed(c.seed);
  c.node.n_collocation = c.ude.n_collocation = c.n_collocation;
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  return parse(in);
}

void RunConfig::set_seed(std::uint64_t value) {
  seed = node.seed = ude.seed = value;
}

void RunConfig::resolve_subjects() {
  if (subjects.empty()) subjects = data::list_subjects(data_path);
}

void RunConfig::validate() const {
  if (subjects.empty()) throw DomainError("no subjects configured");
  if (n_collocation < 4) throw DomainError("n_collocation must be >= 4");
  gompertz.validate();
  node.validate();
  ude.validate();
  for (double f : fractions) forecast::SplitSpec{f, n_collocation}.validate();
  if (symrec.samples < 10) throw DomainError("symrec.samples must be >= 10");
  if (symrec.sig_figs < 1) throw DomainError("symrec.sig_figs must be >= 1");
  if (!(symrec.default_K > 0.0)) throw DomainError("symrec.K must be > 0");
  for (const auto& [id, K] : symrec.subject_K) {
    if (!(K > 0.0)) throw DomainError("symrec.subject_K for " + std::to_string(id) + " must be > 0");
  }
}

SubjectData prepare_subject(const RunConfig& config, int subject_id) {
  auto series = data::load_series(config.data_path, subject_id);
  const auto map = data::make_norm_map(series);
  const auto sigmoid = data::fit_sigmoid(series, map);
  auto interpolant = data::sample_interpolant(sigmoid, map, config.n_collocation);
  std::vector<models::Sample> samples;
  samples.reserve(interpolant.size());
  for (const auto& p : interpolant) samples.push_back({p.tau, map.normalize_volume(p.volume_mm3)});
  return {std::move(series), map, sigmoid, std::move(interpolant), std::move(samples)};
}

models::TrainConfig train_config_for(const RunConfig& config, const SubjectData& subject,
                                     models::ModelKind kind) {
  models::TrainConfig c = kind == models::ModelKind::ude ? config.ude : config.node;
  c.frame = models::PhysicalFrame::from_map(subject.map);
  c.gompertz = config.gompertz;
  c.n_collocation = config.n_collocation;
  return c;
}

fs::path subject_dir(const RunConfig& config, int subject_id) {
  return config.output_dir / ("subject_" + std::to_string(subject_id));
}

void stage_interpolate(const SubjectData& subject, const fs::path& dir) {
  auto csv = open_out(dir / "interpolant.csv");
  data::write_interpolant_csv(csv, subject.interpolant);

  plot::PlotData p;
  p.title = "Sigmoid interpolation, subject " + std::to_string(subject.series.subject_id);
  p.x_label = "time (days)";
  p.y_label = "tumor volume (mm^3)";
  p.x = times_of(subject);
  p.series.push_back({"sigmoid interpolant", volumes_of(subject)});
  p.markers.push_back({"measurements", subject.series.times, subject.series.volumes});
  write_plot_pair(p, dir, "interpolation");
}

double stage_gompertz(const RunConfig& config, const SubjectData& subject, const fs::path& dir) {
  const auto cfg = train_config_for(config, subject, models::ModelKind::gompertz);
  const auto model = models::make_model(models::ModelKind::gompertz, cfg);
  const auto trajectory =
      models::solve(model, subject.v0(), 0.0, 1.0, models::steps_for_span(cfg.solver_steps, 1.0));
  {
    auto csv = open_out(dir / "gompertz_trajectory.csv");
    ode::write_trajectory_csv(csv, physical_trajectory(trajectory, subject.map));
  }
  write_plot_pair(fit_plot(subject, trajectory, "Gompertz ODE", "Gompertz"), dir, "gompertz");
  return models::loss(model, subject.samples, cfg);
}

models::TrainResult stage_train(const RunConfig& config, const SubjectData& subject,
                                models::ModelKind kind, const fs::path& dir) {
  const auto cfg = train_config_for(config, subject, kind);
  auto result = models::train(kind, subject.samples, cfg);
  const std::string tag(models::to_string(kind));
  nn::save_checkpoint(dir / (tag + ".ckpt"), models::to_checkpoint(result.model));
  {
    auto csv = open_out(dir / (tag + "_history.csv"));
    models::write_history_csv(csv, result.report);
  }
  const auto trajectory = models::solve(result.model, subject.v0(), 0.0, 1.0,
                                        models::steps_for_span(cfg.solver_steps, 1.0));
  {
    auto csv = open_out(dir / (tag + "_trajectory.csv"));
    ode::write_trajectory_csv(csv, physical_trajectory(trajectory, subject.map));
  }
  const std::string name = kind == models::ModelKind::ude ? "UDE" : "Neural ODE";
  write_plot_pair(fit_plot(subject, trajectory, name, name), dir, tag);
  return result;
}

std::vector<forecast::SuiteRow> stage_forecast(const RunConfig& config, const SubjectData& subject,
                                               const fs::path& dir) {
  const std::vector<forecast::VariantConfig> variants{
      {models::ModelKind::neural_ode, train_config_for(config, subject, models::ModelKind::neural_ode)},
      {models::ModelKind::ude, train_config_for(config, subject, models::ModelKind::ude)},
  };
  auto rows = forecast::forecast_suite(subject.series.subject_id, subject.samples, variants,
                                       config.fractions, config.n_collocation);
  {
    auto csv = open_out(dir / "forecast_suite.csv");
    forecast::write_suite_csv(csv, rows);
  }
  for (const auto& row : rows) {
    if (!row.ok()) continue;
    const std::string tag(models::to_string(row.variant));
    const std::string stem = "forecast_" + tag + "_" + percent_label(row.fraction);
    {
      auto csv = open_out(dir / (stem + ".csv"));
      forecast::write_cell_csv(csv, subject.samples, row.result);
    }
    auto p = fit_plot(subject, row.result.trajectory,
                      (row.variant == models::ModelKind::ude ? "UDE" : "Neural ODE") +
                          std::string(" forecast, ") + percent_label(row.fraction) + " split",
                      "forecast");
    p.vline = subject.map.denormalize_time(row.result.split_tau);
    write_plot_pair(p, dir, stem);
  }
  return rows;
}

Recovery stage_recover(const RunConfig& config, const SubjectData& subject,
                       const models::DynamicsModel& model, const std::string& tag,
                       const fs::path& dir) {
  const symrec::BasisSet basis{config.symrec.capacity_for(subject.series.subject_id)};
  const auto samples = symrec::sample_physical_derivatives(
      model, subject.map, subject.v0(), config.symrec.samples, config.node.solver_steps);
  const auto dm = symrec::build_design_matrix(samples, basis);
  symrec::SparseOptions options;
  options.lambda = config.symrec.lambda;
  Recovery r;
  r.fit = symrec::sparse_regress(dm.phi, dm.y, options);
  r.expression = symrec::format_expression(r.fit, basis, config.symrec.sig_figs);
  {
    auto csv = open_out(dir / ("recover_" + tag + ".csv"));
    symrec::write_fit_csv(csv, r.fit);
  }
  {
    auto txt = open_out(dir / ("recover_" + tag + ".txt"));
    txt << r.expression << '\n';
  }
  return r;
}

models::DynamicsModel load_trained(const fs::path& dir, const std::string& tag) {
  return models::from_checkpoint(nn::load_checkpoint(dir / (tag + ".ckpt")));
}

SubjectReport run_subject(const RunConfig& config, int subject_id, std::ostream* log) {
  const auto subject = prepare_subject(config, subject_id);
  const auto dir = subject_dir(config, subject_id);
  fs::create_directories(dir);

  SubjectReport report;
  report.subject = subject_id;
  report.K = config.symrec.capacity_for(subject_id);
  ordered_json timing;

  auto stage = [&](const std::string& name, auto&& body) {
    const auto started = std::chrono::steady_clock::now();
    try {
      body();
      if (log) *log << "[subject " << subject_id << "] " << name << ": ok\n";
    } catch (const std::exception& e) {
      report.errors[name] = e.what();
      if (log) *log << "[subject " << subject_id << "] " << name << ": FAILED: " << e.what() << '\n';
    }
    timing[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  std::optional<models::DynamicsModel> node_model, ude_model;
  stage("interpolate", [&] { stage_interpolate(subject, dir); });
  stage("gompertz", [&] { report.gompertz_loss = stage_gompertz(config, subject, dir); });
  stage("train-node", [&] {
    auto r = stage_train(config, subject, models::ModelKind::neural_ode, dir);
    node_model = std::move(r.model);
    report.node = std::move(r.report);
  });
  stage("train-ude", [&] {
    auto r = stage_train(config, subject, models::ModelKind::ude, dir);
    ude_model = std::move(r.model);
    report.ude = std::move(r.report);
  });
  stage("forecast", [&] {
    report.forecasts = stage_forecast(config, subject, dir);
    for (const auto& row : report.forecasts) {
      if (!row.ok()) {
        report.errors["forecast/" + std::string(models::to_string(row.variant)) + "/" +
                      percent_label(row.fraction)] = row.error;
      }
    }
  });
  if (node_model) {
    stage("recover-node", [&] { report.node_recovery = stage_recover(config, subject, *node_model, "node", dir); });
  }
  if (ude_model) {
    stage("recover-ude", [&] { report.ude_recovery = stage_recover(config, subject, *ude_model, "ude", dir); });
  }

  ordered_json summary;
  summary["subject"] = subject_id;
  summary["K"] = report.K;
  summary["sigmoid"] = {{"A", subject.sigmoid.A},
                        {"B", subject.sigmoid.B},
                        {"k", subject.sigmoid.k},
                        {"tau0", subject.sigmoid.tau0},
                        {"sse", subject.sigmoid.sse}};
  summary["normalization"] = {{"t_min", subject.map.t_min()},
                              {"t_max", subject.map.t_max()},
                              {"v_min", subject.map.v_min()},
                              {"v_max", subject.map.v_max()}};
  summary["gompertz_loss"] = report.gompertz_loss ? ordered_json(*report.gompertz_loss) : ordered_json();
  summary["node"] = report.node ? report_json(*report.node) : ordered_json();
  summary["ude"] = report.ude ? report_json(*report.ude) : ordered_json();
  summary["forecasts"] = ordered_json::array();
  for (const auto& row : report.forecasts) {
    summary["forecasts"].push_back({{"variant", models::to_string(row.variant)},
                                    {"fraction", row.fraction},
                                    {"train_loss", row.ok() ? ordered_json(row.train_loss) : ordered_json()},
                                    {"test_mse", row.ok() ? ordered_json(row.test_mse) : ordered_json()},
                                    {"error", row.error}});
  }
  summary["recovered"] = {
      {"node", report.node_recovery ? recovery_json(*report.node_recovery) : ordered_json()},
      {"ude", report.ude_recovery ? recovery_json(*report.ude_recovery) : ordered_json()}};
  summary["errors"] = report.errors;
  {
    auto out = open_out(dir / "summary.json");
    out << summary.dump(2) << '\n';
  }
  if (report.node) timing["node_train_seconds"] = report.node->wall_time_seconds;
  if (report.ude) timing["ude_train_seconds"] = report.ude->wall_time_seconds;
  {
    auto out = open_out(dir / "timing.json");
    out << timing.dump(2) << '\n';
  }
  return report;
}

bool RunAllReport::ok() const {
  if (!failures.empty()) return false;
  return std::all_of(subjects.begin(), subjects.end(), [](const auto& s) { return s.ok(); });
}

RunAllReport run_all(const RunConfig& config, std::ostream* log) {
  config.validate();
  fs::create_directories(config.output_dir);
  RunAllReport all;
  for (int id : config.subjects) {
    try {
      all.subjects.push_back(run_subject(config, id, log));
    } catch (const std::exception& e) {
      all.failures[id] = e.what();
      if (log) *log << "[subject " << id << "] FAILED: " << e.what() << '\n';
    }
  }

  auto num = [](const std::optional<double>& v) {
    return v ? detail::shortest(*v) : std::string("nan");
  };

  {
    auto out = open_out(config.output_dir / "results_summary.csv");
    out << "subject,K,node_loss,ude_loss,node_expression,ude_expression\n";
    for (const auto& s : all.subjects) {
      out << s.subject << ',' << num(s.K) << ','
          << num(s.node ? std::optional(s.node->final_loss) : std::nullopt) << ','
          << num(s.ude ? std::optional(s.ude->final_loss) : std::nullopt) << ','
          << quoted(s.node_recovery ? s.node_recovery->expression : "") << ','
          << quoted(s.ude_recovery ? s.ude_recovery->expression : "") << '\n';
    }
  }
  {
    auto out = open_out(config.output_dir / "forecast_summary.csv");
    bool header = true;
    if (all.subjects.empty()) out << "subject,variant,fraction,train_loss,test_mse\n";
    for (const auto& s : all.subjects) {
      forecast::write_suite_csv(out, s.forecasts, header);
      header = false;
    }
  }
  {
    auto out = open_out(config.output_dir / "forecast_table.csv");
    out << "subject,K";
    for (const char* tag : {"node", "ude"}) {
      for (double f : config.fractions) out << ',' << tag << '_' << percent_label(f);
    }
    out << '\n';
    for (const auto& s : all.subjects) {
      out << s.subject << ',' << num(s.K);
      for (auto kind : {models::ModelKind::neural_ode, models::ModelKind::ude}) {
        for (double f : config.fractions) {
          std::optional<double> v;
          for (const auto& row : s.forecasts) {
            if (row.variant == kind && row.fraction == f && row.ok()) v = row.test_mse;
          }
          out << ',' << num(v);
        }
      }
      out << '\n';
    }
  }
  return all;
}

}  // namespace tgrowth::pipeline
