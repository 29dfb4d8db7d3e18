#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "tgrowth/errors.hpp"
#include "tgrowth/odeint.hpp"

using namespace tgrowth;
using namespace tgrowth::ode;

namespace {
const GompertzParams kP{0.3, 1200.0};
ScalarField gompertz_field(const GompertzParams& p) {
  return [p](double, double v) { return gompertz_rhs(v, p); };
}
}  // namespace

TEST(GompertzRhs, Values) {
  EXPECT_EQ(gompertz_rhs(1200, kP), 0.0);
  EXPECT_NEAR(gompertz_rhs(1200 / std::numbers::e, kP), 132.437, 1e-3);
  EXPECT_NEAR(gompertz_rhs(1200 / std::numbers::e, kP), 0.3 * 1200 / std::numbers::e, 1e-12);
  EXPECT_LT(gompertz_rhs(2400, kP), 0.0);
  EXPECT_THROW(gompertz_rhs(0.0, kP), DomainError);
  EXPECT_THROW((GompertzParams{-1, 10}.validate()), DomainError);
  EXPECT_THROW((GompertzParams{1, 0}.validate()), DomainError);
}

TEST(GompertzExact, Limits) {
  EXPECT_EQ(gompertz_exact(0, 50, kP), 50.0);
  EXPECT_LT(tgtest::rel_err(gompertz_exact(1e3 / 0.3, 50, kP), 1200), 1e-9);
  for (double t : {0.0, 1.0, 10.0, 100.0}) EXPECT_DOUBLE_EQ(gompertz_exact(t, 1200, kP), 1200);
}

TEST(GompertzExact, SatisfiesOde) {
  // Central difference of the closed form against the right-hand side.
  for (double t : {0.5, 2.0, 5.0, 9.0}) {
    const double h = 1e-4;
    const double d = (gompertz_exact(t + h, 50, kP) - gompertz_exact(t - h, 50, kP)) / (2 * h);
    EXPECT_LT(tgtest::rel_err(d, gompertz_rhs(gompertz_exact(t, 50, kP), kP)), 1e-7);
  }
}

TEST(Rk4, ZeroField) {
  const auto tr = integrate_rk4([](double, double) { return 0.0; }, 7.0, 0, 1, 10);
  ASSERT_EQ(tr.size(), 11u);
  for (double s : tr.states) EXPECT_EQ(s, 7.0);
  EXPECT_EQ(tr.times.back(), 1.0);
}

TEST(Rk4, GompertzEndpoint) {
  const auto tr = integrate_rk4(gompertz_field(kP), 50, 0, 10, 1000);
  EXPECT_LT(tgtest::rel_err(tr.back(), gompertz_exact(10, 50, kP)), 1e-8);
  double worst = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    worst = std::max(worst, tgtest::rel_err(tr.states[i], gompertz_exact(tr.times[i], 50, kP)));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Rk4, FourthOrder) {
  auto err = [](std::size_t n) {
    return std::abs(integrate_rk4(gompertz_field(kP), 50, 0, 10, n).back() - gompertz_exact(10, 50, kP));
  };
  const double e1 = err(25), e2 = err(50), e3 = err(100);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2);
  EXPECT_NEAR(std::log2(e2 / e3), 4.0, 0.2);
}

TEST(Rk4, GompertzMonotoneBounded) {
  for (double v0 : {1.0, 50.0, 600.0, 1199.0}) {
    const auto tr = integrate_rk4(gompertz_field(kP), v0, 0, 30, 3000);
    for (std::size_t i = 1; i < tr.size(); ++i) {
      EXPECT_GE(tr.states[i], tr.states[i - 1]);
      EXPECT_LE(tr.states[i], 1200 + 1e-9);
    }
  }
  const auto eq = integrate_rk4(gompertz_field(kP), 1200, 0, 10, 100);
  for (double s : eq.states) EXPECT_NEAR(s, 1200, 1e-12 * 1200);
}

TEST(Rk4, DivergenceNamesStep) {
  try {
    integrate_rk4([](double, double v) { return v * v; }, 1.0, 0, 2, 200);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 0u);
    EXPECT_LE(e.step(), 200u);
  }
  EXPECT_THROW(integrate_rk4([](double, double) { return 0.0; }, 1, 0, 1, 0), DomainError);
}

TEST(Rk4, ClampedGompertzCountsClamps) {
  ClampedGompertz f(kP);
  EXPECT_EQ(f(0, 600), gompertz_rhs(600, kP));
  EXPECT_EQ(f.clamp_events(), 0u);
  EXPECT_TRUE(std::isfinite(f(0, -5.0)));
  EXPECT_EQ(f.clamp_events(), 1u);
}

TEST(EvalAt, Interpolation) {
  Trajectory tr{{0, 0.5, 1}, {1, 3, 4}};
  EXPECT_EQ(eval_at(tr, 0.5), 3.0);
  EXPECT_EQ(eval_at(tr, 0.25), 2.0);
  EXPECT_EQ(eval_at(tr, 1.0), 4.0);
  EXPECT_EQ(eval_at(tr, 0.0), 1.0);
  EXPECT_THROW(eval_at(tr, 1.5), DomainError);
  EXPECT_THROW(eval_at(tr, -0.1), DomainError);
}

TEST(Trajectory, Csv) {
  std::ostringstream out;
  write_trajectory_csv(out, Trajectory{{0, 1}, {2, 3}});
  EXPECT_EQ(out.str(), "t,state\n0,2\n1,3\n");
}
