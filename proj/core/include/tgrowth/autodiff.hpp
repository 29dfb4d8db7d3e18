#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tgrowth::ad {

class Tape;

/// A scalar recorded on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(double constant) : value_(constant) {}  // NOLINT: implicit constants are intended

  double value() const noexcept { return value_; }
  bool is_constant() const noexcept { return tape_ == nullptr; }
  std::int64_t index() const noexcept { return index_; }
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int64_t index, double value) : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::int64_t index_ = -1;
  double value_ = 0.0;
};

/// Wengert list for reverse-mode differentiation. Every node has at most two
/// parents and stores the local partials towards them.
class Tape {
 public:
  Var variable(double value);

  /// Records a node with value `value` and partials d/dparent.
  Var record(const char* op, double value, const Var& a, double da);
  Var record(const char* op, double value, const Var& a, double da, const Var& b, double db);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adjoints of every node w.r.t. `output`. Throws GradientError naming the
  /// first node (in reverse order) whose value or adjoint is non-finite.
  std::vector<double> backward(const Var& output) const;
  /// "node <i> (<op>)" for diagnostics.
  std::string describe(const Var& v) const;

 private:
  struct Node {
    const char* op;
    double value;
    std::int64_t a;
    std::int64_t b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);

using LossFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Gradient of `loss` at `theta` by one reverse sweep over the recorded graph.
std::vector<double> grad(const LossFunction& loss, std::span<const double> theta);

/// Same, also returning the loss value.
std::vector<double> value_and_grad(const LossFunction& loss, std::span<const double> theta,
                                   double& value);

}  // namespace tgrowth::ad
