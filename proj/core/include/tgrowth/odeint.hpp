#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "tgrowth/errors.hpp"

namespace tgrowth::ode {

/// dV/dt = a V ln(K/V). `a` is per unit of the integration variable, K is in
/// state units.
struct GompertzParams {
  double a = 0.3;
  double K = 1200.0;

  void validate() const;
};

/// a V ln(K/V); throws DomainError for V <= 0.
double gompertz_rhs(double v, const GompertzParams& p);

/// Closed form K exp(ln(V0/K) exp(-a t)).
double gompertz_exact(double t, double v0, const GompertzParams& p);

/// Smallest state the solvers feed into ln(K/V).
inline constexpr double kGompertzFloor = 1e-12;

/// Gompertz right-hand side with the state clamped to kGompertzFloor.
/// Every clamp is counted.
class ClampedGompertz {
 public:
  explicit ClampedGompertz(GompertzParams p) : p_(p) { p_.validate(); }
  double operator()(double /*t*/, double v) const;
  std::size_t clamp_events() const noexcept { return clamps_; }

 private:
  GompertzParams p_;
  mutable std::size_t clamps_ = 0;
};

/// Solution nodes of a fixed-step solve.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> states;

  std::size_t size() const noexcept { return times.size(); }
  double front() const { return states.front(); }
  double back() const { return states.back(); }
};

/// Autonomous or not, the field is called as f(t, v).
using ScalarField = std::function<double(double, double)>;

/// One classical RK4 step. Generic over the state type so the autodiff tape
/// can record it.
template <class T, class F>
T rk4_step(F&& f, double t, const T& y, double h) {
  const T k1 = f(t, y);
  const T k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
  const T k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
  const T k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Time of node i on a uniform grid; the last node is exactly t1.
inline double grid_time(double t0, double t1, std::size_t i, std::size_t n_steps) {
  return i == n_steps ? t1 : t0 + static_cast<double>(i) * ((t1 - t0) / static_cast<double>(n_steps));
}

/// All n_steps + 1 states of a fixed-step RK4 solve, no finiteness checks.
template <class T, class F>
std::vector<T> rk4_states(F&& f, const T& v0, double t0, double t1, std::size_t n_steps) {
  const double h = (t1 - t0) / static_cast<double>(n_steps);
  std::vector<T> states;
  states.reserve(n_steps + 1);
  states.push_back(v0);
  for (std::size_t i = 0; i < n_steps; ++i) {
    states.push_back(rk4_step(f, grid_time(t0, t1, i, n_steps), states.back(), h));
  }
  return states;
}

/// Classical RK4 with h = (t1 - t0) / n_steps. Throws DivergenceError at the
/// first non-finite state.
Trajectory integrate_rk4(const ScalarField& rhs, double v0, double t0, double t1,
                         std::size_t n_steps);

/// Linear interpolation between the bracketing nodes. DomainError outside the span.
double eval_at(const Trajectory& trajectory, double t);

/// Index k of the segment [t_k, t_{k+1}] holding t and the weight of node k+1.
struct Bracket {
  std::size_t index;
  double weight;
};
Bracket bracket(const std::vector<double>& times, double t);

/// CSV with header `t,state`.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace tgrowth::ode
