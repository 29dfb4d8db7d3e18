#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "tgrowth/autodiff.hpp"
#include "tgrowth/dataio.hpp"
#include "tgrowth/neuralnet.hpp"
#include "tgrowth/odeint.hpp"

namespace tgrowth::models {

enum class ModelKind { gompertz, neural_ode, ude };

std::string_view to_string(ModelKind kind);
/// Accepts "gompertz", "node"/"neural_ode", "ude".
ModelKind parse_model_kind(std::string_view name);

/// Physical coordinates of the normalized state: t = t_min + time_scale * tau
/// and V = volume_offset + volume_scale * v. The identity frame makes the
/// normalized and physical coordinates coincide.
struct PhysicalFrame {
  double time_scale = 1.0;
  double volume_offset = 0.0;
  double volume_scale = 1.0;

  static PhysicalFrame from_map(const data::NormalizationMap& map);
  double volume(double v) const noexcept { return volume_offset + volume_scale * v; }
};

/// Gompertz dynamics with a, K in physical units, integrated in normalized
/// coordinates: dv/dtau = (time_scale / volume_scale) * a V ln(K / V).
struct GompertzModel {
  ode::GompertzParams params;
  PhysicalFrame frame;
};

/// dv/dtau = f(v) or f(v, tau) when time_input is set.
struct NeuralOdeModel {
  nn::MLPParams net;
  bool time_input = false;
};

/// dv/dtau = NN1(v) * (v + volume_offset) * NN2(v). The middle factor is the
/// physical volume in units of the volume range; NN1 stands in for the growth
/// rate and NN2 for ln(K/V).
struct UdeModel {
  nn::MLPParams growth;
  nn::MLPParams modulation;
  double volume_offset = 0.0;
};

using DynamicsModel = std::variant<GompertzModel, NeuralOdeModel, UdeModel>;

ModelKind kind_of(const DynamicsModel& model);

/// Right-hand side dv/dtau. DomainError for a non-positive Gompertz volume.
double rhs(const DynamicsModel& model, double v, double tau);

/// One normalized collocation point.
struct Sample {
  double tau;
  double v;
};

struct Stage {
  double learning_rate;
  std::size_t epochs;
};

struct TrainConfig {
  std::vector<Stage> schedule{{0.01, 500}};
  std::uint64_t seed = 123;
  std::size_t n_collocation = 21;
  /// RK4 steps per unit of normalized time.
  std::size_t solver_steps = 100;
  std::vector<std::size_t> hidden{128, 128, 64, 64};
  bool time_input = false;
  PhysicalFrame frame;
  ode::GompertzParams gompertz;

  static TrainConfig neural_ode_defaults();
  static TrainConfig ude_defaults();

  std::size_t total_epochs() const;
  void validate() const;
};

/// Step count for a normalized span: round(per_unit * span), at least 1.
std::size_t steps_for_span(std::size_t per_unit, double span);

/// Fresh model of the given kind. Networks are Glorot-initialized from
/// config.seed (NN2 of the UDE from config.seed + 1).
DynamicsModel make_model(ModelKind kind, const TrainConfig& config);

struct SolveStats {
  std::size_t clamp_events = 0;
};

/// Fixed-step RK4 of the model from (tau0, v0) to tau1.
ode::Trajectory solve(const DynamicsModel& model, double v0, double tau0, double tau1,
                      std::size_t steps, SolveStats* stats = nullptr);

/// Mean squared error between the solve started at data.front() and every
/// sample, predictions read off the trajectory by linear interpolation.
double loss(const DynamicsModel& model, std::span<const Sample> data, const TrainConfig& config);

/// Trainable parameters, flattened (NN1 then NN2 for the UDE; empty for Gompertz).
std::vector<double> parameters(const DynamicsModel& model);
void set_parameters(DynamicsModel& model, std::span<const double> theta);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Loss and its exact gradient through the unrolled RK4 solve (discrete adjoint).
LossGradient loss_and_gradient(const DynamicsModel& model, std::span<const Sample> data,
                               const TrainConfig& config);

/// The same loss recorded on an autodiff tape with theta as the leaves.
ad::Var loss_on_tape(const DynamicsModel& model, std::span<const ad::Var> theta,
                     std::span<const Sample> data, const TrainConfig& config);

struct TrainReport {
  double initial_loss = 0.0;
  /// Loss of the returned (best) parameters, equal to loss_history.back().
  double final_loss = 0.0;
  /// final_loss in squared physical volume units.
  double final_loss_physical = 0.0;
  /// Best-so-far loss after each epoch.
  std::vector<double> loss_history;
  /// Loss evaluated at the start of each epoch.
  std::vector<double> epoch_loss;
  double wall_time_seconds = 0.0;
};

struct TrainResult {
  DynamicsModel model;
  TrainReport report;
};

/// Full-batch Adam over the schedule, moments reset at every stage boundary.
/// Returns the best parameters seen. Gompertz models are evaluated, not fitted.
TrainResult train(ModelKind kind, std::span<const Sample> data, const TrainConfig& config);
TrainResult train(DynamicsModel initial, std::span<const Sample> data, const TrainConfig& config);

/// CSV `epoch,loss` (1-based epochs).
void write_history_csv(std::ostream& out, const TrainReport& report);

nn::Checkpoint to_checkpoint(const DynamicsModel& model);
DynamicsModel from_checkpoint(const nn::Checkpoint& checkpoint);

}  // namespace tgrowth::models
