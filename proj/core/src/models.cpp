#include "tgrowth/models.hpp"
#include "numfmt.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

namespace tgrowth::models {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double gompertz_factor(const GompertzModel& m) {
  return m.frame.time_scale / m.frame.volume_scale;
}

// Reusable per-model buffers for the right-hand side and its pullback.
class RhsEvaluator {
 public:
  explicit RhsEvaluator(const DynamicsModel& model) : model_(model) {
    std::visit(Overloaded{
                   [](const GompertzModel& g) { g.params.validate(); },
                   [this](const NeuralOdeModel& m) {
                     check_scalar_net(m.net, m.time_input ? 2 : 1);
                     first_.emplace(m.net.arch);
                   },
                   [this](const UdeModel& m) {
                     check_scalar_net(m.growth, 1);
                     check_scalar_net(m.modulation, 1);
                     first_.emplace(m.growth.arch);
                     second_.emplace(m.modulation.arch);
                   },
               },
               model_);
  }

  double value(double v, double tau) {
    return std::visit(
        Overloaded{
            [&](const GompertzModel& m) {
              const double V = std::max(m.frame.volume(v), ode::kGompertzFloor);
              if (V != m.frame.volume(v)) ++clamps_;
              return gompertz_factor(m) * m.params.a * V * std::log(m.params.K / V);
            },
            [&](const NeuralOdeModel& m) {
              const double x[2] = {v, tau};
              return first_->run(m.net.theta, std::span<const double>(x, m.time_input ? 2 : 1))[0];
            },
            [&](const UdeModel& m) {
              const double n1 = first_->run(m.growth.theta, std::span<const double>(&v, 1))[0];
              const double n2 = second_->run(m.modulation.theta, std::span<const double>(&v, 1))[0];
              return n1 * (v + m.volume_offset) * n2;
            },
        },
        model_);
  }

  // d(cot * f)/dv; accumulates d(cot * f)/dtheta into grad (layout of parameters()).
  double pullback(double v, double tau, double cot, std::span<double> grad) {
    return std::visit(
        Overloaded{
            [&](const GompertzModel& m) {
              const double V = m.frame.volume(v);
              if (V < ode::kGompertzFloor) return 0.0;
              return cot * gompertz_factor(m) * m.params.a * m.frame.volume_scale *
                     (std::log(m.params.K / V) - 1.0);
            },
            [&](const NeuralOdeModel& m) {
              const double x[2] = {v, tau};
              first_->run(m.net.theta, std::span<const double>(x, m.time_input ? 2 : 1));
              return first_->pullback(m.net.theta, std::span<const double>(&cot, 1), grad)[0];
            },
            [&](const UdeModel& m) {
              const double u = v + m.volume_offset;
              const double n1 = first_->run(m.growth.theta, std::span<const double>(&v, 1))[0];
              const double n2 = second_->run(m.modulation.theta, std::span<const double>(&v, 1))[0];
              const std::size_t split = m.growth.theta.size();
              const double c1 = cot * u * n2;
              const double c2 = cot * n1 * u;
              const double d1 =
                  first_->pullback(m.growth.theta, std::span<const double>(&c1, 1), grad.first(split))[0];
              const double d2 = second_->pullback(m.modulation.theta, std::span<const double>(&c2, 1),
                                                  grad.subspan(split))[0];
              return d1 + d2 + cot * n1 * n2;
            },
        },
        model_);
  }

  std::size_t clamp_events() const noexcept { return clamps_; }

 private:
  static void check_scalar_net(const nn::MLPParams& p, std::size_t inputs) {
    p.arch.validate();
    if (p.arch.input_width() != inputs || p.arch.output_width() != 1) {
      throw DomainError("dynamics network must map " + std::to_string(inputs) +
                        " input(s) to 1 output");
    }
    if (p.theta.size() != p.arch.parameter_count()) {
      throw DomainError("dynamics network parameter count mismatch");
    }
  }

  const DynamicsModel& model_;
  std::optional<nn::MLPTrace> first_;
  std::optional<nn::MLPTrace> second_;
  std::size_t clamps_ = 0;
};

void check_data(std::span<const Sample> data) {
  if (data.size() < 2) throw DomainError("loss needs at least 2 samples");
  for (std::size_t i = 1; i < data.size(); ++i) {
    if (!(data[i].tau > data[i - 1].tau)) throw DomainError("samples must be sorted by tau");
  }
}

std::size_t loss_steps(std::span<const Sample> data, const TrainConfig& config) {
  return steps_for_span(config.solver_steps, data.back().tau - data.front().tau);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gompertz: return "gompertz";
    case ModelKind::neural_ode: return "node";
    case ModelKind::ude: return "ude";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gompertz") return ModelKind::gompertz;
  if (name == "node" || name == "neural_ode") return ModelKind::neural_ode;
  if (name == "ude") return ModelKind::ude;
  throw DomainError("unknown model variant '" + std::string(name) + "'");
}

PhysicalFrame PhysicalFrame::from_map(const data::NormalizationMap& map) {
  return {map.time_span(), map.v_min(), map.volume_span()};
}

ModelKind kind_of(const DynamicsModel& model) {
  return static_cast<ModelKind>(model.index());
}

double rhs(const DynamicsModel& model, double v, double tau) {
  if (const auto* g = std::get_if<GompertzModel>(&model)) {
    return gompertz_factor(*g) * ode::gompertz_rhs(g->frame.volume(v), g->params);
  }
  RhsEvaluator eval(model);
  return eval.value(v, tau);
}

TrainConfig TrainConfig::neural_ode_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::ude_defaults() {
  TrainConfig c;
  c.schedule = {{0.01, 1000}, {0.005, 1000}, {0.001, 500}};
  c.hidden = {10, 10};
  return c;
}

std::size_t TrainConfig::total_epochs() const {
  std::size_t n = 0;
  for (const auto& s : schedule) n += s.epochs;
  return n;
}

void TrainConfig::validate() const {
  if (schedule.empty()) throw DomainError("training schedule is empty");
  for (const auto& s : schedule) {
    if (s.epochs < 1) throw DomainError("every training stage needs epochs >= 1");
    if (!(s.learning_rate > 0.0)) throw DomainError("learning rates must be > 0");
  }
  if (solver_steps < 1) throw DomainError("solver_steps must be >= 1");
  if (n_collocation < 2) throw DomainError("n_collocation must be >= 2");
  if (!(frame.time_scale > 0.0) || !(frame.volume_scale > 0.0)) {
    throw DomainError("physical frame scales must be > 0");
  }
}

std::size_t steps_for_span(std::size_t per_unit, double span) {
  const auto n = static_cast<long long>(std::llround(static_cast<double>(per_unit) * span));
  return static_cast<std::size_t>(std::max(1LL, n));
}

DynamicsModel make_model(ModelKind kind, const TrainConfig& config) {
  switch (kind) {
    case ModelKind::gompertz:
      config.gompertz.validate();
      return GompertzModel{config.gompertz, config.frame};
    case ModelKind::neural_ode: {
      const auto arch = nn::MLPArch::with_hidden(config.time_input ? 2 : 1, config.hidden, 1);
      return NeuralOdeModel{nn::init_params(arch, config.seed), config.time_input};
    }
    case ModelKind::ude: {
      const auto arch = nn::MLPArch::with_hidden(1, config.hidden, 1);
      return UdeModel{nn::init_params(arch, config.seed), nn::init_params(arch, config.seed + 1),
                      config.frame.volume_offset / config.frame.volume_scale};
    }
  }
  throw DomainError("unknown model kind");
}

ode::Trajectory solve(const DynamicsModel& model, double v0, double tau0, double tau1,
                      std::size_t steps, SolveStats* stats) {
  RhsEvaluator eval(model);
  auto field = [&eval](double t, double v) { return eval.value(v, t); };
  auto trajectory = ode::integrate_rk4(field, v0, tau0, tau1, steps);
  if (stats) stats->clamp_events = eval.clamp_events();
  return trajectory;
}

double loss(const DynamicsModel& model, std::span<const Sample> data, const TrainConfig& config) {
  check_data(data);
  const auto traj = solve(model, data.front().v, data.front().tau, data.back().tau,
                          loss_steps(data, config));
  double sum = 0.0;
  for (const auto& s : data) {
    const double r = ode::eval_at(traj, s.tau) - s.v;
    sum += r * r;
  }
  return sum / static_cast<double>(data.size());
}

std::vector<double> parameters(const DynamicsModel& model) {
  return std::visit(Overloaded{
                        [](const GompertzModel&) { return std::vector<double>{}; },
                        [](const NeuralOdeModel& m) { return m.net.theta; },
                        [](const UdeModel& m) {
                          auto theta = m.growth.theta;
                          theta.insert(theta.end(), m.modulation.theta.begin(),
                                       m.modulation.theta.end());
                          return theta;
                        },
                    },
                    model);
}

void set_parameters(DynamicsModel& model, std::span<const double> theta) {
  std::visit(Overloaded{
                 [&](GompertzModel&) {
                   if (!theta.empty()) throw DomainError("Gompertz model has no trainable parameters");
                 },
                 [&](NeuralOdeModel& m) {
                   if (theta.size() != m.net.theta.size()) throw DomainError("parameter count mismatch");
                   std::copy(theta.begin(), theta.end(), m.net.theta.begin());
                 },
                 [&](UdeModel& m) {
                   const std::size_t n1 = m.growth.theta.size();
                   if (theta.size() != n1 + m.modulation.theta.size()) {
                     throw DomainError("parameter count mismatch");
                   }
                   std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n1),
                             m.growth.theta.begin());
                   std::copy(theta.begin() + static_cast<std::ptrdiff_t>(n1), theta.end(),
                             m.modulation.theta.begin());
                 },
             },
             model);
}

LossGradient loss_and_gradient(const DynamicsModel& model, std::span<const Sample> data,
                               const TrainConfig& config) {
  check_data(data);
  const std::size_t n = loss_steps(data, config);
  const double t0 = data.front().tau;
  const double t1 = data.back().tau;
  const double h = (t1 - t0) / static_cast<double>(n);
  RhsEvaluator eval(model);

  // Forward sweep keeping the four stage states of every step.
  std::vector<double> times(n + 1), y(n + 1);
  std::vector<std::array<double, 4>> stage(n);
  y[0] = data.front().v;
  times[0] = t0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = times[k];
    auto& u = stage[k];
    u[0] = y[k];
    const double k1 = eval.value(u[0], t);
    u[1] = y[k] + 0.5 * h * k1;
    const double k2 = eval.value(u[1], t + 0.5 * h);
    u[2] = y[k] + 0.5 * h * k2;
    const double k3 = eval.value(u[2], t + 0.5 * h);
    u[3] = y[k] + h * k3;
    const double k4 = eval.value(u[3], t + h);
    y[k + 1] = y[k] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    times[k + 1] = ode::grid_time(t0, t1, k + 1, n);
    if (!std::isfinite(y[k + 1])) throw DivergenceError("RK4 state became non-finite", k + 1);
  }

  // Loss and its adjoint on the nodes.
  const double inv_n = 1.0 / static_cast<double>(data.size());
  std::vector<double> ybar(n + 1, 0.0);
  double sum = 0.0;
  for (const auto& s : data) {
    const auto [k, w] = ode::bracket(times, s.tau);
    const double pred = w == 0.0 ? y[k] : (1.0 - w) * y[k] + w * y[k + 1];
    const double r = pred - s.v;
    sum += r * r;
    ybar[k] += 2.0 * r * (1.0 - w) * inv_n;
    if (w != 0.0) ybar[k + 1] += 2.0 * r * w * inv_n;
  }

  LossGradient out;
  out.loss = sum * inv_n;
  out.gradient.assign(parameters(model).size(), 0.0);

  // Reverse sweep through the unrolled steps.
  for (std::size_t k = n; k-- > 0;) {
    const double a = ybar[k + 1];
    if (a == 0.0) continue;
    const double t = times[k];
    const auto& u = stage[k];
    double k4bar = a * h / 6.0;
    double k3bar = a * h / 3.0;
    double k2bar = a * h / 3.0;
    double k1bar = a * h / 6.0;
    double acc = a;
    const double u4bar = eval.pullback(u[3], t + h, k4bar, out.gradient);
    acc += u4bar;
    k3bar += h * u4bar;
    const double u3bar = eval.pullback(u[2], t + 0.5 * h, k3bar, out.gradient);
    acc += u3bar;
    k2bar += 0.5 * h * u3bar;
    const double u2bar = eval.pullback(u[1], t + 0.5 * h, k2bar, out.gradient);
    acc += u2bar;
    k1bar += 0.5 * h * u2bar;
    acc += eval.pullback(u[0], t, k1bar, out.gradient);
    ybar[k] += acc;
  }
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    if (!std::isfinite(out.gradient[i])) {
      throw GradientError("non-finite gradient", "parameter " + std::to_string(i));
    }
  }
  return out;
}

ad::Var loss_on_tape(const DynamicsModel& model, std::span<const ad::Var> theta,
                     std::span<const Sample> data, const TrainConfig& config) {
  check_data(data);
  using ad::Var;
  auto field = [&](double t, const Var& v) -> Var {
    return std::visit(
        Overloaded{
            [&](const GompertzModel& m) -> Var {
              const Var V = m.frame.volume_offset + m.frame.volume_scale * v;
              return gompertz_factor(m) * m.params.a * V * ad::log(m.params.K / V);
            },
            [&](const NeuralOdeModel& m) -> Var {
              const Var x[2] = {v, Var(t)};
              return nn::forward_generic<Var>(m.net.arch, theta,
                                              std::span<const Var>(x, m.time_input ? 2 : 1))[0];
            },
            [&](const UdeModel& m) -> Var {
              const std::size_t split = m.growth.theta.size();
              const Var n1 = nn::forward_generic<Var>(m.growth.arch, theta.first(split),
                                                      std::span<const Var>(&v, 1))[0];
              const Var n2 = nn::forward_generic<Var>(m.modulation.arch, theta.subspan(split),
                                                      std::span<const Var>(&v, 1))[0];
              return n1 * (v + m.volume_offset) * n2;
            },
        },
        model);
  };
  const std::size_t n = loss_steps(data, config);
  const double t0 = data.front().tau;
  const double t1 = data.back().tau;
  const auto states = ode::rk4_states<Var>(field, Var(data.front().v), t0, t1, n);
  std::vector<double> times(n + 1);
  for (std::size_t k = 0; k <= n; ++k) times[k] = ode::grid_time(t0, t1, k, n);

  Var sum(0.0);
  for (const auto& s : data) {
    const auto [k, w] = ode::bracket(times, s.tau);
    const Var pred = w == 0.0 ? states[k] : (1.0 - w) * states[k] + w * states[k + 1];
    const Var r = pred - s.v;
    sum = sum + r * r;
  }
  return sum / static_cast<double>(data.size());
}

TrainResult train(ModelKind kind, std::span<const Sample> data, const TrainConfig& config) {
  config.validate();
  return train(make_model(kind, config), data, config);
}

TrainResult train(DynamicsModel initial, std::span<const Sample> data,
                  const TrainConfig& config) {
  config.validate();
  check_data(data);
  const auto started = std::chrono::steady_clock::now();
  const double physical = config.frame.volume_scale * config.frame.volume_scale;
  TrainResult result{std::move(initial), {}};
  auto& report = result.report;

  if (kind_of(result.model) == ModelKind::gompertz) {
    const double l = loss(result.model, data, config);
    report.initial_loss = report.final_loss = l;
    report.loss_history = {l};
    report.epoch_loss = {l};
  } else {
    std::vector<double> theta = parameters(result.model);
    std::vector<double> best = theta;
    double best_loss = std::numeric_limits<double>::infinity();
    DynamicsModel work = result.model;

    auto evaluate = [&](bool with_gradient) {
      set_parameters(work, theta);
      LossGradient lg;
      try {
        lg = with_gradient ? loss_and_gradient(work, data, config)
                           : LossGradient{loss(work, data, config), {}};
      } catch (const Error& e) {
        throw TrainingError(std::string("training diverged: ") + e.what(), report.epoch_loss);
      }
      if (!std::isfinite(lg.loss)) {
        throw TrainingError("non-finite training loss", report.epoch_loss);
      }
      if (lg.loss < best_loss) {
        best_loss = lg.loss;
        best = theta;
      }
      return lg;
    };

    bool first = true;
    for (const auto& stage : config.schedule) {
      auto adam = nn::AdamState::fresh(theta.size(), stage.learning_rate);
      for (std::size_t e = 0; e < stage.epochs; ++e) {
        const auto lg = evaluate(true);
        report.epoch_loss.push_back(lg.loss);
        if (first) {
          report.initial_loss = lg.loss;
          first = false;
        } else {
          report.loss_history.push_back(best_loss);
        }
        nn::adam_update(theta, lg.gradient, adam);
      }
    }
    evaluate(false);
    report.loss_history.push_back(best_loss);
    report.final_loss = best_loss;
    set_parameters(result.model, best);
  }
  report.final_loss_physical = report.final_loss * physical;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void write_history_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < report.loss_history.size(); ++i) {
    out << i + 1 << ',' << detail::Num{report.loss_history[i]} << '\n';
  }
}

nn::Checkpoint to_checkpoint(const DynamicsModel& model) {
  nn::Checkpoint cp;
  cp.variant = std::string(to_string(kind_of(model)));
  std::visit(Overloaded{
                 [&](const GompertzModel& m) {
                   cp.scalars = {{"a", m.params.a},
                                 {"K", m.params.K},
                                 {"time_scale", m.frame.time_scale},
                                 {"volume_offset", m.frame.volume_offset},
                                 {"volume_scale", m.frame.volume_scale}};
                 },
                 [&](const NeuralOdeModel& m) {
                   cp.scalars = {{"time_input", m.time_input ? 1.0 : 0.0}};
                   cp.networks = {{"f", m.net}};
                 },
                 [&](const UdeModel& m) {
                   cp.scalars = {{"volume_offset", m.volume_offset}};
                   cp.networks = {{"nn1", m.growth}, {"nn2", m.modulation}};
                 },
             },
             model);
  return cp;
}

DynamicsModel from_checkpoint(const nn::Checkpoint& cp) {
  switch (parse_model_kind(cp.variant)) {
    case ModelKind::gompertz:
      return GompertzModel{{cp.scalar("a"), cp.scalar("K")},
                           {cp.scalar("time_scale"), cp.scalar("volume_offset"),
                            cp.scalar("volume_scale")}};
    case ModelKind::neural_ode:
      return NeuralOdeModel{cp.network("f"), cp.scalar("time_input") != 0.0};
    case ModelKind::ude:
      return UdeModel{cp.network("nn1"), cp.network("nn2"), cp.scalar("volume_offset")};
  }
  throw DomainError("unknown model variant");
}

}  // namespace tgrowth::models
