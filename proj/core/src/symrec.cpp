#include "tgrowth/symrec.hpp"
#include "numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>

namespace tgrowth::symrec {
namespace {

std::string format_number(double x, int sig_figs) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.*g", std::max(sig_figs, 1), x);
  std::string s = buf;
  // "%#g" keeps a trailing point for integers at full precision ("1200.")
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string format_capacity(double K) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", K);
  return buf;
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

double BasisSet::evaluate(std::size_t j, double v) const {
  if (!(v > 0.0)) throw DomainError("basis evaluation needs V > 0");
  switch (j) {
    case 0: return v;
    case 1: return v * std::log(K / v);
    case 2: return v * (1.0 - v / K);
    case 3: return v * v;
    default: throw DomainError("basis index out of range");
  }
}

std::string BasisSet::term(std::size_t j) const {
  const auto k = format_capacity(K);
  switch (j) {
    case 0: return "V";
    case 1: return "V*log(" + k + "/V)";
    case 2: return "V*(1 - V/" + k + ")";
    case 3: return "V^2";
    default: throw DomainError("basis index out of range");
  }
}

std::vector<PhysicalSample> sample_physical_derivatives(const models::DynamicsModel& model,
                                                        const data::NormalizationMap& map,
                                                        double v0, std::size_t n,
                                                        std::size_t solver_steps) {
  if (n < 10) throw DomainError("derivative sampling needs n >= 10");
  const auto trajectory =
      models::solve(model, v0, 0.0, 1.0, models::steps_for_span(solver_steps, 1.0));
  const double rate_scale = map.volume_span() / map.time_span();
  std::vector<PhysicalSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(n - 1);
    const double v = ode::eval_at(trajectory, tau);
    out.push_back({map.denormalize_volume(v), rate_scale * models::rhs(model, v, tau)});
  }
  return out;
}

DesignMatrix build_design_matrix(const std::vector<PhysicalSample>& samples,
                                 const BasisSet& basis) {
  if (!(basis.K > 0.0)) throw DomainError("carrying capacity must be > 0");
  DesignMatrix dm{Eigen::MatrixXd(static_cast<Eigen::Index>(samples.size()), kBasisSize),
                  Eigen::VectorXd(static_cast<Eigen::Index>(samples.size()))};
  for (Eigen::Index i = 0; i < dm.phi.rows(); ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < kBasisSize; ++j) {
      dm.phi(i, static_cast<Eigen::Index>(j)) = basis.evaluate(j, s.volume);
    }
    dm.y[i] = s.rate;
  }
  return dm;
}

SparseFit sparse_regress(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                         const SparseOptions& options) {
  const Eigen::Index n = phi.rows();
  const Eigen::Index p = phi.cols();
  if (p != static_cast<Eigen::Index>(kBasisSize)) throw DomainError("design matrix needs 4 columns");
  if (n < p) throw DomainError("sparse regression needs at least 4 rows");
  if (y.size() != n) throw DomainError("target length differs from design rows");
  if (!phi.allFinite() || !y.allFinite()) throw DomainError("design matrix or target not finite");

  Eigen::VectorXd scale = phi.colwise().norm().transpose() / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(scale[j] > 0.0)) scale[j] = 1.0;  // all-zero column: coefficient stays 0
  }
  const Eigen::MatrixXd X = phi * scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd gram = X.transpose() * X;
  const Eigen::VectorXd xty = X.transpose() * y;

  SparseFit fit;
  fit.lambda = options.lambda.value_or(1e-3 * xty.lpNorm<Eigen::Infinity>() /
                                       static_cast<double>(n));
  if (fit.lambda < 0.0) throw DomainError("lambda must be >= 0");

  // f(b) = ||Xb - y||^2, grad = 2 (G b - X^T y), Lipschitz 2 * lambda_max(G).
  const double lipschitz =
      2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();
  const double yty = y.squaredNorm();
  auto objective = [&](const Eigen::VectorXd& b) {
    return b.dot(gram * b) - 2.0 * b.dot(xty) + yty + fit.lambda * b.lpNorm<1>();
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  std::vector<double> history;
  bool converged = lipschitz == 0.0;
  if (!converged) {
    const double step = 1.0 / lipschitz;
    Eigen::VectorXd z = b, b_next(p);
    double t = 1.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      const Eigen::VectorXd g = 2.0 * (gram * z - xty);
      for (Eigen::Index j = 0; j < p; ++j) {
        b_next[j] = soft_threshold(z[j] - step * g[j], step * fit.lambda);
      }
      const double change = (b_next - b).lpNorm<Eigen::Infinity>();
      double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      // Restart momentum when it points uphill.
      if ((z - b_next).dot(b_next - b) > 0.0) t_next = t = 1.0;
      z = b_next + ((t - 1.0) / t_next) * (b_next - b);
      b = b_next;
      t = t_next;
      fit.iterations = it + 1;
      if (it % 64 == 0) history.push_back(objective(b));
      if (change < options.tolerance) {
        converged = true;
        break;
      }
    }
  }
  if (!converged) {
    history.push_back(objective(b));
    std::vector<double> best(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) best[static_cast<std::size_t>(j)] = b[j] / scale[j];
    throw FitError("sparse regression did not converge in " +
                       std::to_string(options.max_iterations) + " iterations",
                   best, history);
  }

  const double largest = b.lpNorm<Eigen::Infinity>();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(b[j]) < options.threshold * largest) b[j] = 0.0;
    const auto k = static_cast<std::size_t>(j);
    fit.scaled_beta[k] = b[j];
    fit.beta[k] = b[j] / scale[j];
    if (b[j] != 0.0) fit.active_set.push_back(k);
  }
  Eigen::Map<const Eigen::Vector4d> beta(fit.beta.data());
  fit.residual_norm = (phi * beta - y).norm();
  return fit;
}

std::string format_expression(const SparseFit& fit, const BasisSet& basis, int sig_figs) {
  std::string out = "dV/dt ≈ ";
  bool first = true;
  for (std::size_t j = 0; j < kBasisSize; ++j) {
    const double c = fit.beta[j];
    if (c == 0.0) continue;
    const auto magnitude = format_number(std::abs(c), sig_figs);
    if (first) {
      out += (c < 0.0 ? "-" : "") + magnitude;
    } else {
      out += (c < 0.0 ? " - " : " + ") + magnitude;
    }
    out += "*" + basis.term(j);
    first = false;
  }
  if (first) out += "0";
  return out;
}

void write_fit_csv(std::ostream& out, const SparseFit& fit) {
  out << "basis_index,coefficient\n";
  for (std::size_t j = 0; j < kBasisSize; ++j) out << j + 1 << ',' << detail::Num{fit.beta[j]} << '\n';
}

}  // namespace tgrowth::symrec
