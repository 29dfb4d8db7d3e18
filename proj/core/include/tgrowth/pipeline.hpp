#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tgrowth/dataio.hpp"
#include "tgrowth/forecast.hpp"
#include "tgrowth/models.hpp"
#include "tgrowth/symrec.hpp"

namespace tgrowth::pipeline {

struct SymrecSettings {
  std::size_t samples = 101;
  std::optional<double> lambda;
  int sig_figs = 3;
  double default_K = 1200.0;
  std::map<int, double> subject_K;

  double capacity_for(int subject) const;
};

/// Everything a run needs. Defaults reproduce the reference hyperparameters,
/// so an empty config file runs the full pipeline.
struct RunConfig {
  std::filesystem::path data_path = "data/tumor_volumes.csv";
  /// Empty in the file means "every subject in the data file".
  std::vector<int> subjects;
  std::size_t n_collocation = 21;
  ode::GompertzParams gompertz{0.3, 1200.0};
  models::TrainConfig node = models::TrainConfig::neural_ode_defaults();
  models::TrainConfig ude = models::TrainConfig::ude_defaults();
  std::vector<double> fractions{0.9, 0.8, 0.7};
  SymrecSettings symrec;
  std::uint64_t seed = 123;
  std::filesystem::path output_dir = "out";

  /// INI text: [section] headers and key = value lines, '#'/';' comments.
  static RunConfig parse(std::istream& in);
  static RunConfig load(const std::filesystem::path& path);

  void set_seed(std::uint64_t value);
  /// Fills subjects from the data file when none were configured.
  void resolve_subjects();
  void validate() const;
};

/// Preprocessed data for one subject.
struct SubjectData {
  data::TumorSeries series;
  data::NormalizationMap map;
  data::SigmoidFit sigmoid;
  std::vector<data::InterpolantSample> interpolant;
  std::vector<models::Sample> samples;  // normalized collocation points

  double v0() const { return samples.front().v; }
};

SubjectData prepare_subject(const RunConfig& config, int subject_id);

/// Training configuration for a variant with the subject's frame and seed applied.
models::TrainConfig train_config_for(const RunConfig& config, const SubjectData& subject,
                                     models::ModelKind kind);

std::filesystem::path subject_dir(const RunConfig& config, int subject_id);

struct Recovery {
  symrec::SparseFit fit;
  std::string expression;
};

/// Individual stages; each writes its artifacts into `dir`.
void stage_interpolate(const SubjectData& subject, const std::filesystem::path& dir);
double stage_gompertz(const RunConfig& config, const SubjectData& subject,
                      const std::filesystem::path& dir);
models::TrainResult stage_train(const RunConfig& config, const SubjectData& subject,
                                models::ModelKind kind, const std::filesystem::path& dir);
std::vector<forecast::SuiteRow> stage_forecast(const RunConfig& config,
                                               const SubjectData& subject,
                                               const std::filesystem::path& dir);
Recovery stage_recover(const RunConfig& config, const SubjectData& subject,
                       const models::DynamicsModel& model, const std::string& tag,
                       const std::filesystem::path& dir);

/// Loads `<dir>/<tag>.ckpt` written by stage_train.
models::DynamicsModel load_trained(const std::filesystem::path& dir, const std::string& tag);

struct SubjectReport {
  int subject = 0;
  double K = 0.0;
  std::optional<double> gompertz_loss;
  std::optional<models::TrainReport> node;
  std::optional<models::TrainReport> ude;
  std::vector<forecast::SuiteRow> forecasts;
  std::optional<Recovery> node_recovery;
  std::optional<Recovery> ude_recovery;
  /// stage name -> diagnostic, for stages that failed.
  std::map<std::string, std::string> errors;

  bool ok() const noexcept { return errors.empty(); }
};

/// interpolate -> gompertz -> train-node -> train-ude -> forecast -> recover.
/// Failed stages are recorded and independent later stages still run.
/// Writes every artifact plus summary.json into subject_dir(). Throws
/// NotFoundError for an unknown subject before any training.
SubjectReport run_subject(const RunConfig& config, int subject_id, std::ostream* log = nullptr);

struct RunAllReport {
  std::vector<SubjectReport> subjects;
  /// subject id -> failure that stopped the subject entirely.
  std::map<int, std::string> failures;

  bool ok() const;
};

/// Runs every configured subject and writes results_summary.csv (one row per
/// subject), forecast_summary.csv (long format) and forecast_table.csv (one
/// row per subject) into the output directory.
RunAllReport run_all(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace tgrowth::pipeline
