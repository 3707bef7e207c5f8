#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bandit.hpp"
#include "errors.hpp"

namespace metabandit {

/// Number of Power-P features, (P+1)^4.
constexpr std::size_t power_feature_count(std::size_t degree) noexcept {
  const std::size_t n = degree + 1;
  return n * n * n * n;
}

/// Row-major position of f_{i,j,k,l}.
constexpr std::size_t power_feature_index(std::size_t degree, std::size_t i, std::size_t j,
                                          std::size_t k, std::size_t l) noexcept {
  const std::size_t n = degree + 1;
  return ((i * n + j) * n + k) * n + l;
}

inline constexpr std::size_t kMaxPowerDegree = 7;

/// Monomials v1^i v2^j v3^k v4^l over v1 = sqrt(ln t), v2 = 1/sqrt(t_k),
/// v3 = mean reward, v4 = reward stddev. 0^0 is 1.
inline void compute_features(const ArmStats& stats, std::size_t t, std::size_t degree,
                             std::span<double> out) {
  const std::size_t n = degree + 1;
  if (out.size() != power_feature_count(degree))
    throw PreconditionError("compute_features: output span has the wrong size");
  const double v[4] = {std::sqrt(std::log(static_cast<double>(t))),
                       1.0 / std::sqrt(static_cast<double>(stats.plays)), stats.mean,
                       stats.stddev};
  if (n > kMaxPowerDegree + 1) throw PreconditionError("compute_features: degree too large");
  // pw[var][e] = v[var]^e, with pw[var][0] = 1 regardless of v[var].
  std::array<double, 4 * (kMaxPowerDegree + 1)> pw{};
  for (std::size_t var = 0; var < 4; ++var) {
    pw[var * n] = 1.0;
    for (std::size_t e = 1; e < n; ++e) pw[var * n + e] = pw[var * n + e - 1] * v[var];
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double ij = pw[i] * pw[n + j];
      for (std::size_t k = 0; k < n; ++k) {
        const double ijk = ij * pw[2 * n + k];
        for (std::size_t l = 0; l < n; ++l) out[idx++] = ijk * pw[3 * n + l];
      }
    }
}

inline std::vector<double> compute_features(const ArmStats& stats, std::size_t t,
                                            std::size_t degree) {
  std::vector<double> f(power_feature_count(degree));
  compute_features(stats, t, degree, f);
  return f;
}

class ThetaVector {
 public:
  ThetaVector() = default;
  ThetaVector(std::size_t degree, std::vector<double> theta)
      : degree_(degree), theta_(std::move(theta)) {
    if (degree_ > kMaxPowerDegree)
      throw PreconditionError("Power-P degree above " + std::to_string(kMaxPowerDegree));
    if (theta_.size() != power_feature_count(degree_))
      throw PreconditionError("theta has " + std::to_string(theta_.size()) +
                              " entries, Power-" + std::to_string(degree_) + " needs " +
                              std::to_string(power_feature_count(degree_)));
  }
  static ThetaVector zeros(std::size_t degree) {
    return ThetaVector(degree, std::vector<double>(power_feature_count(degree), 0.0));
  }

  std::size_t degree() const noexcept { return degree_; }
  std::span<const double> values() const noexcept { return theta_; }
  std::span<double> values() noexcept { return theta_; }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return theta_[power_feature_index(degree_, i, j, k, l)];
  }

 private:
  std::size_t degree_ = 1;
  std::vector<double> theta_ = std::vector<double>(16, 0.0);
};

/// theta . phi(stats, t) with v1 = sqrt(ln t) supplied by the caller, summed
/// directly over the powers without materializing phi.
inline double index_power_v1(const ThetaVector& theta, const ArmStats& stats, double v1) {
  const std::size_t n = theta.degree() + 1;
  const double v[4] = {v1, 1.0 / std::sqrt(static_cast<double>(stats.plays)), stats.mean,
                       stats.stddev};
  std::array<double, 4 * (kMaxPowerDegree + 1)> pw{};
  for (std::size_t var = 0; var < 4; ++var) {
    pw[var * n] = 1.0;
    for (std::size_t e = 1; e < n; ++e) pw[var * n + e] = pw[var * n + e - 1] * v[var];
  }
  const double* w = theta.values().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double ij = pw[i] * pw[n + j];
      for (std::size_t k = 0; k < n; ++k) {
        const double ijk = ij * pw[2 * n + k];
        double inner = 0.0;
        for (std::size_t l = 0; l < n; ++l) inner += *w++ * pw[3 * n + l];
        acc += ijk * inner;
      }
    }
  return acc;
}

inline double index_power(const ThetaVector& theta, const ArmStats& stats, std::size_t t) {
  return index_power_v1(theta, stats, std::sqrt(std::log(static_cast<double>(t))));
}

// JSON: {"P":1,"theta":[...16 reals...]}
inline nlohmann::json to_json(const ThetaVector& theta) {
  return {{"P", theta.degree()},
          {"theta", std::vector<double>(theta.values().begin(), theta.values().end())}};
}

inline ThetaVector theta_from_json(const nlohmann::json& j) {
  try {
    return ThetaVector(j.at("P").get<std::size_t>(), j.at("theta").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad theta record: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace metabandit
