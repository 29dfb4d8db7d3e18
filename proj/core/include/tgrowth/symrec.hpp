#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tgrowth/dataio.hpp"
#include "tgrowth/models.hpp"

namespace tgrowth::symrec {

inline constexpr std::size_t kBasisSize = 4;

/// phi1 = V, phi2 = V ln(K/V), phi3 = V (1 - V/K), phi4 = V^2.
struct BasisSet {
  double K = 1200.0;

  /// j is 0-based. DomainError for V <= 0.
  double evaluate(std::size_t j, double volume) const;
  /// Human-readable term for basis j, e.g. "V*log(1200/V)".
  std::string term(std::size_t j) const;
};

struct PhysicalSample {
  double volume;  // mm^3
  double rate;    // mm^3 / day
};

/// Solves the model over the normalized span from v0 and, at n uniform tau,
/// reads v and dv/dtau = rhs(model, v). Chain rule to physical units:
/// V = v_min + v (v_max - v_min), dV/dt = (v_max - v_min)/(t_max - t_min) dv/dtau.
std::vector<PhysicalSample> sample_physical_derivatives(const models::DynamicsModel& model,
                                                        const data::NormalizationMap& map,
                                                        double v0, std::size_t n,
                                                        std::size_t solver_steps = 100);

struct DesignMatrix {
  Eigen::MatrixXd phi;  // n x 4
  Eigen::VectorXd y;    // n
};

DesignMatrix build_design_matrix(const std::vector<PhysicalSample>& samples,
                                 const BasisSet& basis);

struct SparseOptions {
  /// Penalty in the column-scaled problem; default 1e-3 * ||X^T y||_inf / n.
  std::optional<double> lambda;
  double tolerance = 1e-10;
  std::size_t max_iterations = 50000;
  /// Scaled coefficients below threshold * max|b| become exactly zero.
  double threshold = 1e-3;
};

struct SparseFit {
  std::array<double, kBasisSize> beta{};
  /// Coefficients of the column-scaled problem (the penalized ones).
  std::array<double, kBasisSize> scaled_beta{};
  /// 0-based indices of the non-zero coefficients.
  std::vector<std::size_t> active_set;
  double residual_norm = 0.0;
  double lambda = 0.0;
  std::size_t iterations = 0;
};

/// min ||Phi beta - y||^2 + lambda ||b||_1 over RMS-scaled columns
/// (b_j = beta_j * s_j) by FISTA with adaptive restart. Throws FitError with
/// the objective history if the iterate change never drops below tolerance.
SparseFit sparse_regress(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                         const SparseOptions& options = {});

/// "dV/dt ≈ c1*V + c2*V*log(K/V) + ..." over active terms in basis order,
/// coefficients to sig_figs significant figures; "dV/dt ≈ 0" when none.
std::string format_expression(const SparseFit& fit, const BasisSet& basis, int sig_figs = 3);

/// CSV `basis_index,coefficient` with 1-based basis indices.
void write_fit_csv(std::ostream& out, const SparseFit& fit);

}  // namespace tgrowth::symrec
