#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "random.hpp"

namespace metabandit {

struct Bernoulli {
  double p = 0.5;
};

// Normal(mu, sigma) conditioned on [0,1], sampled by rejection.
struct TruncatedGaussian {
  double mu = 0.5;
  double sigma = 0.0;
};

using ArmDistribution = std::variant<Bernoulli, TruncatedGaussian>;

inline void validate(const ArmDistribution& dist) {
  std::visit(
      [](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Bernoulli>) {
          if (!(d.p >= 0.0 && d.p <= 1.0))
            throw PreconditionError("bernoulli p must lie in [0,1]");
        } else {
          if (!(d.mu >= 0.0 && d.mu <= 1.0))
            throw PreconditionError("truncated gaussian mu must lie in [0,1]");
          if (!(d.sigma >= 0.0) || !std::isfinite(d.sigma))
            throw PreconditionError("truncated gaussian sigma must be finite and >= 0");
        }
      },
      dist);
}

inline constexpr std::size_t kRejectionCap = 1'000'000;

inline double sample_reward(const Bernoulli& d, Rng& rng) {
  return uniform01(rng) < d.p ? 1.0 : 0.0;
}

inline double sample_reward(const TruncatedGaussian& d, Rng& rng) {
  if (d.sigma == 0.0) return d.mu;
  std::normal_distribution<double> normal(d.mu, d.sigma);
  for (std::size_t i = 0; i < kRejectionCap; ++i) {
    const double x = normal(rng);
    if (x >= 0.0 && x <= 1.0) return x;
  }
  throw std::runtime_error("truncated gaussian rejection sampler exceeded its iteration cap");
}

inline double sample_reward(const ArmDistribution& dist, Rng& rng) {
  return std::visit([&rng](const auto& d) { return sample_reward(d, rng); }, dist);
}

namespace detail {
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
}  // namespace detail

/// Mean of Normal(mu, sigma) conditioned on [0,1] (closed form). With
/// sigma == 0 the law is a point mass at mu.
inline double truncated_mean(double mu, double sigma) {
  if (!(sigma >= 0.0)) throw PreconditionError("truncated_mean: sigma must be >= 0");
  if (sigma == 0.0) return mu;
  const double a = (0.0 - mu) / sigma;
  const double b = (1.0 - mu) / sigma;
  // Upper-tail form keeps precision when both bounds sit far in one tail.
  double z = detail::normal_cdf(b) - detail::normal_cdf(a);
  if (a > 0.0) z = detail::normal_cdf(-a) - detail::normal_cdf(-b);
  if (!(z > 0.0)) return std::clamp(mu, 0.0, 1.0);
  const double m = mu + sigma * (detail::normal_pdf(a) - detail::normal_pdf(b)) / z;
  return std::clamp(m, 0.0, 1.0);
}

inline double expected_reward(const ArmDistribution& dist) {
  return std::visit(
      [](const auto& d) -> double {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Bernoulli>)
          return d.p;
        else
          return truncated_mean(d.mu, d.sigma);
      },
      dist);
}

/// What an episode's regret is measured against. TrueMean: the arm's
/// expected reward (the truncated mean for truncated Gaussians). Location:
/// the pre-truncation mu (p for Bernoulli), as pseudo-regret from pull counts.
enum class RegretBasis { TrueMean, Location };

inline double location_of(const ArmDistribution& dist) {
  return std::visit(
      [](const auto& d) {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Bernoulli>)
          return d.p;
        else
          return d.mu;
      },
      dist);
}

class BanditProblem {
 public:
  explicit BanditProblem(std::vector<ArmDistribution> arms, RegretBasis basis = RegretBasis::TrueMean)
      : arms_(std::move(arms)), basis_(basis) {
    if (arms_.size() < 2) throw PreconditionError("a bandit problem needs at least two arms");
    true_means_.reserve(arms_.size());
    for (const auto& a : arms_) {
      validate(a);
      true_means_.push_back(expected_reward(a));
      regret_means_.push_back(basis == RegretBasis::TrueMean ? true_means_.back() : location_of(a));
    }
    best_mean_ = *std::max_element(true_means_.begin(), true_means_.end());
  }

  std::size_t num_arms() const noexcept { return arms_.size(); }
  const std::vector<ArmDistribution>& arms() const noexcept { return arms_; }
  const std::vector<double>& true_means() const noexcept { return true_means_; }
  double best_mean() const noexcept { return best_mean_; }
  RegretBasis regret_basis() const noexcept { return basis_; }
  // Per-arm values regret is measured against; the true means by default.
  const std::vector<double>& regret_means() const noexcept { return regret_means_; }

  double pull(std::size_t arm, Rng& rng) const { return sample_reward(arms_[arm], rng); }

 private:
  std::vector<ArmDistribution> arms_;
  RegretBasis basis_ = RegretBasis::TrueMean;
  std::vector<double> true_means_;
  std::vector<double> regret_means_;
  double best_mean_ = 0.0;
};

// Per-arm sufficient statistics. `mean` and `stddev` are cached on update.
struct ArmStats {
  std::size_t plays = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population form; 0 after a single play
};

inline ArmStats update_stats(ArmStats s, double reward) {
  s.plays += 1;
  s.sum += reward;
  s.sum_sq += reward * reward;
  const double n = static_cast<double>(s.plays);
  s.mean = s.sum / n;
  s.stddev = std::sqrt(std::max(0.0, s.sum_sq / n - s.mean * s.mean));
  return s;
}

struct EpisodeResult {
  double regret = 0.0;
  std::vector<std::size_t> pulls;
  std::vector<double> arm_rewards;  // reward collected per arm
  double cumulative_reward = 0.0;
  // Set when the policy produced a non-finite index at some step.
  bool invalid_index = false;
};

/// Anything run_episode can drive. `reset` is called once per episode with
/// K; `select` is only called after every arm has one play.
template <class P>
concept EpisodePolicy = requires(P p, std::size_t t, std::span<const ArmStats> stats, Rng& rng) {
  p.reset(std::size_t{});
  { p.select(t, stats, rng) } -> std::convertible_to<std::size_t>;
};

/// Plays one episode of `horizon` steps: arms 0..K-1 once each, then the
/// policy's choice for t = K+1..T (t is 1-based).
template <EpisodePolicy P>
EpisodeResult run_episode(const BanditProblem& problem, P& policy, std::size_t horizon, Rng& rng) {
  const std::size_t k = problem.num_arms();
  if (horizon < k)
    throw PreconditionError("run_episode: horizon (" + std::to_string(horizon) +
                            ") is shorter than the number of arms (" + std::to_string(k) + ")");
  policy.reset(k);
  std::vector<ArmStats> stats(k);
  EpisodeResult out;
  out.pulls.assign(k, 0);
  out.arm_rewards.assign(k, 0.0);
  auto play = [&](std::size_t arm) {
    const double r = problem.pull(arm, rng);
    stats[arm] = update_stats(stats[arm], r);
    out.pulls[arm] += 1;
    out.arm_rewards[arm] += r;
    out.cumulative_reward += r;
  };
  for (std::size_t arm = 0; arm < k; ++arm) play(arm);
  for (std::size_t t = k + 1; t <= horizon; ++t) {
    const std::size_t arm = policy.select(t, std::span<const ArmStats>(stats), rng);
    play(arm);
  }
  if constexpr (requires { { policy.saw_invalid() } -> std::convertible_to<bool>; })
    out.invalid_index = policy.saw_invalid();
  if (problem.regret_basis() == RegretBasis::TrueMean) {
    out.regret = static_cast<double>(horizon) * problem.best_mean() - out.cumulative_reward;
  } else {
    const auto& m = problem.regret_means();
    const double best = *std::max_element(m.begin(), m.end());
    out.regret = 0.0;
    for (std::size_t a = 0; a < k; ++a) out.regret += static_cast<double>(out.pulls[a]) * (best - m[a]);
  }
  return out;
}

/// Eq.-1 style regret from pull counts: sum_k pulls_k * (mu* - mu_k).
inline double pseudo_regret(const BanditProblem& problem, std::span<const std::size_t> pulls) {
  double r = 0.0;
  for (std::size_t k = 0; k < pulls.size(); ++k)
    r += static_cast<double>(pulls[k]) * (problem.best_mean() - problem.true_means()[k]);
  return r;
}

inline RegretBasis regret_basis_from_string(const std::string& name) {
  if (name == "true_mean") return RegretBasis::TrueMean;
  if (name == "location") return RegretBasis::Location;
  throw ConfigError("unknown regret basis '" + name + "' (true_mean or location)");
}

inline std::string to_string(RegretBasis b) { return b == RegretBasis::TrueMean ? "true_mean" : "location"; }

// ---- JSON record: {"arms":[{"kind":"bernoulli","p":0.7}, ...]} ----

inline nlohmann::json to_json(const BanditProblem& problem) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : problem.arms()) {
    std::visit(
        [&arms](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Bernoulli>)
            arms.push_back({{"kind", "bernoulli"}, {"p", d.p}});
          else
            arms.push_back({{"kind", "truncated_gaussian"}, {"mu", d.mu}, {"sigma", d.sigma}});
        },
        a);
  }
  nlohmann::json out = {{"arms", arms}};
  if (problem.regret_basis() == RegretBasis::Location) out["regret"] = "location";
  return out;
}

inline BanditProblem problem_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("arms") || !j["arms"].is_array())
    throw ConfigError("problem record must be an object with an \"arms\" array");
  std::vector<ArmDistribution> arms;
  for (const auto& a : j["arms"]) {
    const std::string kind = a.value("kind", "");
    try {
      if (kind == "bernoulli")
        arms.emplace_back(Bernoulli{a.at("p").get<double>()});
      else if (kind == "truncated_gaussian")
        arms.emplace_back(TruncatedGaussian{a.at("mu").get<double>(), a.at("sigma").get<double>()});
      else
        throw ConfigError("unknown arm kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad arm record: ") + e.what());
    }
  }
  const RegretBasis basis = regret_basis_from_string(j.value("regret", std::string("true_mean")));
  try {
    return BanditProblem(std::move(arms), basis);
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace metabandit
