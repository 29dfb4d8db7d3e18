#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "support.hpp"
#include "tgrowth/dataio.hpp"
#include "tgrowth/errors.hpp"

using namespace tgrowth;
using namespace tgrowth::data;

TEST(Calipers, Values) {
  EXPECT_NEAR(volume_from_calipers(1, 1), 0.5235988, 1e-7);
  EXPECT_EQ(volume_from_calipers(5, 0), 0.0);
  EXPECT_NEAR(volume_from_calipers(2, 1), 1.0471976, 1e-7);
  EXPECT_NEAR(volume_from_calipers(10, 4), std::numbers::pi / 6 * 160, 1e-12);
}

TEST(Calipers, Rejects) {
  EXPECT_THROW(volume_from_calipers(1, 2), DomainError);
  EXPECT_THROW(volume_from_calipers(-1, -2), DomainError);
}

TEST(Calipers, MonotoneInEachArgument) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double w = u(rng), L = w + u(rng), d = u(rng);
    EXPECT_LT(volume_from_calipers(L, w), volume_from_calipers(L + d, w));
    const double w2 = std::min(L, w + 0.5 * (L - w) + 1e-3);
    if (w2 > w) EXPECT_LT(volume_from_calipers(L, w), volume_from_calipers(L, w2));
  }
}

TEST(LoadSeries, ReadsAndSorts) {
  std::istringstream in(
      "# comment\n"
      "id,time_days,volume_mm3\n"
      "1,30,800\n"
      "\n"
      "2,22,5\n"
      "1,22,80\n"
      "1,27,400\n"
      "1,32,1000\n");
  const auto s = load_series(in, 1);
  EXPECT_EQ(s.subject_id, 1);
  EXPECT_EQ(s.times, (std::vector<double>{22, 27, 30, 32}));
  EXPECT_EQ(s.volumes, (std::vector<double>{80, 400, 800, 1000}));
}

TEST(LoadSeries, Errors) {
  const std::string good = "id,time_days,volume_mm3\n1,22,80\n1,27,400\n1,30,800\n1,32,1000\n";
  {
    std::istringstream in(good);
    EXPECT_THROW(load_series(in, 99), NotFoundError);
  }
  {
    std::istringstream in("id,time_days,volume_mm3\n1,22,80\n1,27,abc\n");
    try {
      load_series(in, 1);
      FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 3u);
      EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
  }
  {
    std::istringstream in("subject,t,v\n1,22,80\n");
    EXPECT_THROW(load_series(in, 1), ParseError);
  }
  {
    std::istringstream in("id,time_days,volume_mm3\n1,22,80\n1,22,90\n1,27,400\n1,30,800\n");
    EXPECT_THROW(load_series(in, 1), ParseError);
  }
  {
    std::istringstream in("id,time_days,volume_mm3\n1,22,80\n1,27,400\n1,30,800\n");
    EXPECT_THROW(load_series(in, 1), DomainError);  // fewer than 4 points
  }
  {
    std::istringstream in("id,time_days,volume_mm3\n1,22,80\n1,27,-1\n1,30,800\n1,32,900\n");
    EXPECT_THROW(load_series(in, 1), DomainError);
  }
  EXPECT_THROW(load_series("/nonexistent/file.csv", 1), NotFoundError);
}

TEST(LoadSeries, BundledData) {
  const auto ids = list_subjects(TGROWTH_DATA_FILE);
  EXPECT_EQ(ids, (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  for (int id : ids) {
    const auto s = load_series(TGROWTH_DATA_FILE, id);
    EXPECT_EQ(s.times.front(), 22.0);
    EXPECT_EQ(s.times.back(), 32.0);
  }
}

TEST(Normalization, Examples) {
  const NormalizationMap m(22, 32, 80, 1000);
  EXPECT_EQ(m.normalize_time(22), 0.0);
  EXPECT_EQ(m.normalize_time(27), 0.5);
  EXPECT_NEAR(m.denormalize_volume(m.normalize_volume(123.4)), 123.4, 1e-12);
  EXPECT_THROW(NormalizationMap(1, 1, 0, 1), DomainError);
  EXPECT_THROW(NormalizationMap(0, 1, 2, 2), DomainError);
}

TEST(Normalization, RoundTripProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double t0 = 100 * u(rng), v0 = 1000 * u(rng);
    const NormalizationMap m(t0, t0 + 1 + 50 * u(rng), v0, v0 + 1 + 2000 * u(rng));
    const double t = m.t_min() + u(rng) * m.time_span();
    const double v = m.v_min() + u(rng) * m.volume_span();
    EXPECT_NEAR(m.denormalize_time(m.normalize_time(t)), t, 1e-12 * std::max(1.0, t));
    EXPECT_NEAR(m.denormalize_volume(m.normalize_volume(v)), v, 1e-12 * std::max(1.0, v));
  }
}

namespace {
TumorSeries sigmoid_series(double A, double B, double k, double tau0, int n) {
  TumorSeries s;
  s.subject_id = 1;
  for (int i = 0; i < n; ++i) {
    const double tau = static_cast<double>(i) / (n - 1);
    s.times.push_back(22.0 + 10.0 * tau);
    s.volumes.push_back(A + B / (1.0 + std::exp(-k * (tau - tau0))));
  }
  return s;
}
}  // namespace

TEST(Sigmoid, NoiselessRoundTrip) {
  const auto s = sigmoid_series(50, 1000, 8, 0.5, 10);
  const auto fit = fit_sigmoid(s, make_norm_map(s));
  EXPECT_LT(tgtest::rel_err(fit.A, 50), 1e-6);
  EXPECT_LT(tgtest::rel_err(fit.B, 1000), 1e-6);
  EXPECT_LT(tgtest::rel_err(fit.k, 8), 1e-6);
  EXPECT_LT(tgtest::rel_err(fit.tau0, 0.5), 1e-6);
  EXPECT_LT(fit.sse, 1e-12);
}

TEST(Sigmoid, RoundTripProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uA(10, 200), uB(300, 2000), uk(4, 14), ut(0.3, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    const double A = uA(rng), B = uB(rng), k = uk(rng), t0 = ut(rng);
    const auto s = sigmoid_series(A, B, k, t0, 12);
    const auto fit = fit_sigmoid(s, make_norm_map(s));
    EXPECT_LT(tgtest::rel_err(fit.A, A), 1e-6) << trial;
    EXPECT_LT(tgtest::rel_err(fit.B, B), 1e-6) << trial;
    EXPECT_LT(tgtest::rel_err(fit.k, k), 1e-6) << trial;
    EXPECT_LT(tgtest::rel_err(fit.tau0, t0), 1e-6) << trial;
  }
}

TEST(Sigmoid, ConstantDataIsFitError) {
  TumorSeries s{1, {22, 24, 26, 28, 30}, {100, 100, 100, 100, 100}};
  EXPECT_THROW(fit_sigmoid(s, NormalizationMap(22, 30, 0, 1)), FitError);
}

TEST(Sigmoid, BundledSubjectsFitMonotone) {
  for (int id = 1; id <= 10; ++id) {
    const auto s = load_series(TGROWTH_DATA_FILE, id);
    const auto map = make_norm_map(s);
    const auto fit = fit_sigmoid(s, map);
    EXPECT_GT(fit.B, 0.0);
    EXPECT_GT(fit.k, 0.0);
    const auto pts = sample_interpolant(fit, map, 201);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_GT(pts[i].tau, pts[i - 1].tau);
      EXPECT_GT(pts[i].volume_mm3, pts[i - 1].volume_mm3);
    }
    for (const auto& p : pts) {
      EXPECT_GE(p.volume_mm3, fit.A);
      EXPECT_LE(p.volume_mm3, fit.A + fit.B);
    }
  }
}

TEST(Interpolant, Grid) {
  const SigmoidFit fit{50, 1000, 8, 0.5};
  const NormalizationMap map(22, 32, 50, 1050);
  const auto two = sample_interpolant(fit, map, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].tau, 0.0);
  EXPECT_EQ(two[1].tau, 1.0);
  EXPECT_EQ(two[1].time_days, 32.0);
  const auto pts = sample_interpolant(fit, map, 21);
  ASSERT_EQ(pts.size(), 21u);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_NEAR(pts[i].tau - pts[i - 1].tau, 0.05, 1e-15);
  EXPECT_THROW(sample_interpolant(fit, map, 1), DomainError);
}

TEST(Interpolant, Csv) {
  const SigmoidFit fit{50, 1000, 8, 0.5};
  std::ostringstream out;
  write_interpolant_csv(out, sample_interpolant(fit, NormalizationMap(22, 32, 50, 1050), 3));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tau,time_days,volume_mm3");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 5), "0,22,");
}
