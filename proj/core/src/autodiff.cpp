#include "tgrowth/autodiff.hpp"

#include <cmath>
#include <string>

#include "tgrowth/errors.hpp"

namespace tgrowth::ad {
namespace {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape() && b.tape() && a.tape() != b.tape()) {
    throw DomainError("autodiff variables from different tapes");
  }
  return a.tape() ? a.tape() : b.tape();
}

}  // namespace

Var Tape::variable(double value) {
  nodes_.push_back({"input", value, -1, -1, 0.0, 0.0});
  return Var(this, static_cast<std::int64_t>(nodes_.size()) - 1, value);
}

Var Tape::record(const char* op, double value, const Var& a, double da) {
  nodes_.push_back({op, value, a.tape_ ? a.index_ : -1, -1, da, 0.0});
  return Var(this, static_cast<std::int64_t>(nodes_.size()) - 1, value);
}

Var Tape::record(const char* op, double value, const Var& a, double da, const Var& b, double db) {
  nodes_.push_back({op, value, a.tape_ ? a.index_ : -1, b.tape_ ? b.index_ : -1, da, db});
  return Var(this, static_cast<std::int64_t>(nodes_.size()) - 1, value);
}

std::string Tape::describe(const Var& v) const {
  if (v.is_constant() || v.index() >= static_cast<std::int64_t>(nodes_.size())) return "constant";
  return "node " + std::to_string(v.index()) + " (" + nodes_[static_cast<std::size_t>(v.index())].op + ")";
}

std::vector<double> Tape::backward(const Var& output) const {
  std::vector<double> adjoint(nodes_.size(), 0.0);
  if (output.is_constant()) return adjoint;
  if (output.tape() != this) throw DomainError("backward called with a foreign variable");

  adjoint[static_cast<std::size_t>(output.index())] = 1.0;
  for (std::int64_t i = output.index(); i >= 0; --i) {
    const auto& node = nodes_[static_cast<std::size_t>(i)];
    const double g = adjoint[static_cast<std::size_t>(i)];
    if (g == 0.0) continue;
    if (!std::isfinite(node.value) || !std::isfinite(g)) {
      throw GradientError("non-finite value in reverse sweep", describe(Var(const_cast<Tape*>(this), i, node.value)));
    }
    if (node.a >= 0) adjoint[static_cast<std::size_t>(node.a)] += g * node.da;
    if (node.b >= 0) adjoint[static_cast<std::size_t>(node.b)] += g * node.db;
  }
  return adjoint;
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() + b.value();
  return t ? t->record("add", v, a, 1.0, b, 1.0) : Var(v);
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() - b.value();
  return t ? t->record("sub", v, a, 1.0, b, -1.0) : Var(v);
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() * b.value();
  return t ? t->record("mul", v, a, b.value(), b, a.value()) : Var(v);
}

Var operator/(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double v = a.value() / b.value();
  return t ? t->record("div", v, a, 1.0 / b.value(), b, -v / b.value()) : Var(v);
}

Var operator-(const Var& a) {
  return a.tape() ? a.tape()->record("neg", -a.value(), a, -1.0) : Var(-a.value());
}

Var tanh(const Var& x) {
  const double y = std::tanh(x.value());
  return x.tape() ? x.tape()->record("tanh", y, x, 1.0 - y * y) : Var(y);
}

Var exp(const Var& x) {
  const double y = std::exp(x.value());
  return x.tape() ? x.tape()->record("exp", y, x, y) : Var(y);
}

Var log(const Var& x) {
  const double y = std::log(x.value());
  return x.tape() ? x.tape()->record("log", y, x, 1.0 / x.value()) : Var(y);
}

std::vector<double> value_and_grad(const LossFunction& loss, std::span<const double> theta,
                                   double& value) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(theta.size());
  for (double t : theta) inputs.push_back(tape.variable(t));
  const Var out = loss(tape, inputs);
  value = out.value();
  if (!std::isfinite(value)) {
    throw GradientError("non-finite loss value",
                        out.is_constant() ? std::string("output") : tape.describe(out));
  }
  const auto adjoint = tape.backward(out);
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) g[i] = adjoint[i];
  return g;
}

std::vector<double> grad(const LossFunction& loss, std::span<const double> theta) {
  double value = 0.0;
  return value_and_grad(loss, theta, value);
}

}  // namespace tgrowth::ad
