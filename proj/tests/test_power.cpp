#include <metabandit/policies.hpp>
#include <metabandit/power.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace metabandit;

namespace {

ArmStats stats(std::size_t plays, double mean, double stddev) {
  ArmStats s;
  s.plays = plays;
  s.mean = mean;
  s.stddev = stddev;
  return s;
}

// Direct expansion: x^e with 0^0 = 1.
double pw(double x, std::size_t e) {
  double r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= x;
  return r;
}

}  // namespace

TEST(PowerFeatures, Counts) {
  EXPECT_EQ(power_feature_count(1), 16u);
  EXPECT_EQ(power_feature_count(2), 81u);
  for (std::size_t p = 0; p <= kMaxPowerDegree; ++p)
    EXPECT_EQ(compute_features(stats(3, 0.2, 0.1), 10, p).size(), (p + 1) * (p + 1) * (p + 1) * (p + 1));
}

TEST(PowerFeatures, AllZeroVariables) {
  const auto f = compute_features(stats(1, 0.0, 0.0), 1, 1);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) {
          const double want = (i == 0 && k == 0 && l == 0) ? 1.0 : 0.0;
          EXPECT_EQ(f[power_feature_index(1, i, j, k, l)], want);
        }
}

TEST(PowerFeatures, RowMajorExpansion) {
  const auto s = stats(4, 0.3, 0.2);
  const std::size_t t = 57;
  const double v[4] = {std::sqrt(std::log(57.0)), 0.5, 0.3, 0.2};
  for (std::size_t P : {1, 2, 3}) {
    const auto f = compute_features(s, t, P);
    std::size_t idx = 0;
    for (std::size_t i = 0; i <= P; ++i)
      for (std::size_t j = 0; j <= P; ++j)
        for (std::size_t k = 0; k <= P; ++k)
          for (std::size_t l = 0; l <= P; ++l, ++idx)
            EXPECT_NEAR(f[idx], pw(v[0], i) * pw(v[1], j) * pw(v[2], k) * pw(v[3], l), 1e-15);
  }
}

TEST(PowerFeatures, VariableValues) {
  const double e = std::numbers::e;
  // t = e is not an integer step; ln(3) stands in and v1 = sqrt(ln 3).
  const auto f = compute_features(stats(4, 0.0, 0.0), 3, 1);
  EXPECT_DOUBLE_EQ(f[power_feature_index(1, 1, 0, 0, 0)], std::sqrt(std::log(3.0)));
  EXPECT_DOUBLE_EQ(f[power_feature_index(1, 0, 1, 0, 0)], 0.5);
  EXPECT_NEAR(std::sqrt(std::log(e)), 1.0, 1e-15);
}

TEST(PowerIndex, Basics) {
  const auto s = stats(7, 0.61, 0.3);
  EXPECT_EQ(index_power(ThetaVector::zeros(2), s, 90), 0.0);
  ThetaVector unit = ThetaVector::zeros(1);
  unit.at(0, 0, 1, 0) = 1.0;
  EXPECT_EQ(index_power(unit, s, 90), 0.61);
  EXPECT_THROW(ThetaVector(1, std::vector<double>(15)), PreconditionError);
}

TEST(PowerIndex, ContainsUcb1) {
  Rng rng(1);
  for (double C : {0.0, 0.2, 2.0, 7.5}) {
    ThetaVector th = ThetaVector::zeros(1);
    th.at(1, 1, 0, 0) = std::sqrt(C);
    th.at(0, 0, 1, 0) = 1.0;
    for (int i = 0; i < 1000; ++i) {
      const std::size_t t = 1 + rng() % 10000;
      const auto s = stats(1 + rng() % t, uniform01(rng), 0.5 * uniform01(rng));
      EXPECT_NEAR(index_power(th, s, t), index_ucb1(s, t, C), 1e-12);
    }
  }
}

TEST(PowerIndex, LinearInTheta) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(81), b(81), mix(81);
    const double x = uniform01(rng) * 4 - 2, y = uniform01(rng) * 4 - 2;
    for (std::size_t i = 0; i < 81; ++i) {
      a[i] = uniform01(rng) - 0.5;
      b[i] = uniform01(rng) - 0.5;
      mix[i] = x * a[i] + y * b[i];
    }
    const std::size_t t = 2 + rng() % 1000;
    const auto s = stats(1 + rng() % t, uniform01(rng), 0.5 * uniform01(rng));
    const double lhs = index_power(ThetaVector(2, mix), s, t);
    const double rhs = x * index_power(ThetaVector(2, a), s, t) + y * index_power(ThetaVector(2, b), s, t);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(PowerIndex, JsonRoundTrip) {
  ThetaVector th = ThetaVector::zeros(1);
  th.at(1, 0, 0, 1) = -0.25;
  const auto j = to_json(th);
  EXPECT_EQ(j["P"], 1);
  EXPECT_EQ(j["theta"].size(), 16u);
  const auto back = theta_from_json(j);
  EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), th.values().begin()));
  EXPECT_THROW(theta_from_json(nlohmann::json::parse(R"({"P":1,"theta":[1,2]})")), ConfigError);
}
