#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tgrowth {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text; line() is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An iterative fit stopped without meeting its convergence test. Carries the
/// best parameters reached and the objective value after every iteration.
class FitError : public Error {
 public:
  FitError(const std::string& what, std::vector<double> best_params,
           std::vector<double> history)
      : Error(what), best_params_(std::move(best_params)), history_(std::move(history)) {}
  const std::vector<double>& best_params() const noexcept { return best_params_; }
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> best_params_;
  std::vector<double> history_;
};

/// The ODE state became non-finite; step() is the failing step index.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Non-finite value met while differentiating; location() names the graph node.
class GradientError : public Error {
 public:
  GradientError(const std::string& what, std::string location)
      : Error(what + " at " + location), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

/// Training produced a non-finite loss. history() holds the per-epoch losses so far.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace tgrowth
