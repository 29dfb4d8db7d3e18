#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tgrowth/autodiff.hpp"
#include "tgrowth/errors.hpp"
#include "tgrowth/neuralnet.hpp"
#include "tgrowth/odeint.hpp"

using namespace tgrowth;
using ad::Tape;
using ad::Var;

namespace {
double central_fd(const ad::LossFunction& f, std::vector<double> theta, std::size_t i, double h) {
  auto eval = [&](const std::vector<double>& th) {
    Tape tape;
    std::vector<Var> vars;
    for (double t : th) vars.push_back(tape.variable(t));
    return f(tape, vars).value();
  };
  theta[i] += h;
  const double plus = eval(theta);
  theta[i] -= 2 * h;
  return (plus - eval(theta)) / (2 * h);
}
}  // namespace

TEST(Tape, SumOfSquares) {
  const std::vector<double> theta{1.5, -2.0, 0.25, 0.0};
  const auto g = ad::grad(
      [](Tape&, std::span<const Var> th) {
        Var s = 0.0;
        for (const auto& t : th) s += t * t;
        return s;
      },
      theta);
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 2 * theta[i]);
}

TEST(Tape, ConstantLossHasZeroGradient) {
  const std::vector<double> theta{1.0, 2.0};
  double value = 0;
  const auto g = ad::value_and_grad([](Tape&, std::span<const Var>) { return Var(4.0); }, theta, value);
  EXPECT_EQ(value, 4.0);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0}));
}

TEST(Tape, ElementaryDerivatives) {
  const std::vector<double> theta{0.7, 1.9};
  const ad::LossFunction f = [](Tape&, std::span<const Var> th) {
    return ad::tanh(th[0]) * ad::exp(th[1]) / (th[0] + 2.0) - ad::log(th[1]) + (-th[0]);
  };
  const auto g = ad::grad(f, theta);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(g[i], central_fd(f, theta, i, 1e-6), 1e-8);
}

TEST(Tape, NonFiniteNamesNode) {
  const std::vector<double> theta{0.0};
  try {
    ad::grad([](Tape&, std::span<const Var> th) { return ad::log(th[0]); }, theta);
    FAIL() << "expected GradientError";
  } catch (const GradientError& e) {
    EXPECT_NE(e.location().find("log"), std::string::npos);
  }
}

TEST(Tape, MlpSquaredOutputMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = nn::init_params(nn::MLPArch{{1, 10, 10, 1}}, seed);
    const double x = u(rng);
    const ad::LossFunction f = [&](Tape&, std::span<const Var> th) {
      const Var in[] = {Var(x)};
      const auto out = nn::forward_generic<Var>(p.arch, th, std::span<const Var>(in, 1));
      return out[0] * out[0];
    };
    const auto g = ad::grad(f, p.theta);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double fd = central_fd(f, p.theta, i, 1e-5);
      EXPECT_LE(std::abs(g[i] - fd), 1e-6 * std::max({std::abs(g[i]), std::abs(fd), 1e-6}))
          << "seed " << seed << " coordinate " << i;
    }
  }
}

TEST(Tape, ThroughUnrolledRk4) {
  const auto p = nn::init_params(nn::MLPArch{{1, 10, 10, 1}}, 3);
  const ad::LossFunction f = [&](Tape&, std::span<const Var> th) {
    auto field = [&](double, const Var& v) {
      const Var in[] = {v};
      return nn::forward_generic<Var>(p.arch, th, std::span<const Var>(in, 1))[0];
    };
    const auto states = ode::rk4_states<Var>(field, Var(0.2), 0.0, 1.0, 10);
    Var s = 0.0;
    for (const auto& v : states) s += (v - 0.5) * (v - 0.5);
    return s;
  };
  const auto g = ad::grad(f, p.theta);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double fd = central_fd(f, p.theta, i, 1e-5);
    EXPECT_LE(std::abs(g[i] - fd), 1e-5 * std::max({std::abs(g[i]), std::abs(fd), 1e-6}));
  }
}
