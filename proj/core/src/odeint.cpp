#include "tgrowth/odeint.hpp"
#include "numfmt.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

namespace tgrowth::ode {

void GompertzParams::validate() const {
  if (!(a > 0.0)) throw DomainError("Gompertz growth rate a must be > 0");
  if (!(K > 0.0)) throw DomainError("Gompertz carrying capacity K must be > 0");
}

double gompertz_rhs(double v, const GompertzParams& p) {
  if (!(v > 0.0)) throw DomainError("Gompertz rhs needs V > 0");
  return p.a * v * std::log(p.K / v);
}

double gompertz_exact(double t, double v0, const GompertzParams& p) {
  if (!(v0 > 0.0)) throw DomainError("Gompertz solution needs V0 > 0");
  return p.K * std::exp(std::log(v0 / p.K) * std::exp(-p.a * t));
}

double ClampedGompertz::operator()(double, double v) const {
  if (!(v >= kGompertzFloor)) {
    ++clamps_;
    v = kGompertzFloor;
  }
  return p_.a * v * std::log(p_.K / v);
}

Trajectory integrate_rk4(const ScalarField& rhs, double v0, double t0, double t1,
                         std::size_t n_steps) {
  if (n_steps < 1) throw DomainError("integrate_rk4 needs n_steps >= 1");
  if (!(t1 > t0)) throw DomainError("integrate_rk4 needs t1 > t0");
  if (!std::isfinite(v0)) throw DivergenceError("non-finite initial state", 0);

  const double h = (t1 - t0) / static_cast<double>(n_steps);
  Trajectory out;
  out.times.reserve(n_steps + 1);
  out.states.reserve(n_steps + 1);
  out.times.push_back(t0);
  out.states.push_back(v0);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double next = rk4_step(rhs, out.times.back(), out.states.back(), h);
    if (!std::isfinite(next)) throw DivergenceError("RK4 state became non-finite", i + 1);
    out.times.push_back(grid_time(t0, t1, i + 1, n_steps));
    out.states.push_back(next);
  }
  return out;
}

Bracket bracket(const std::vector<double>& times, double t) {
  if (times.empty() || t < times.front() || t > times.back() || std::isnan(t)) {
    throw DomainError("time " + std::to_string(t) + " outside trajectory span");
  }
  if (times.size() == 1) return {0, 0.0};
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  k = std::min(k, times.size() - 2);
  const double w = (t - times[k]) / (times[k + 1] - times[k]);
  return {k, w};
}

double eval_at(const Trajectory& trajectory, double t) {
  const auto [k, w] = bracket(trajectory.times, t);
  if (trajectory.size() == 1 || w == 0.0) return trajectory.states[k];
  if (w == 1.0) return trajectory.states[k + 1];
  return (1.0 - w) * trajectory.states[k] + w * trajectory.states[k + 1];
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,state\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    out << detail::Num{trajectory.times[i]} << ',' << detail::Num{trajectory.states[i]} << '\n';
  }
}

}  // namespace tgrowth::ode
