#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bandit.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "policies.hpp"
#include "policy_spec.hpp"
#include "random.hpp"

namespace metabandit {

/// Empirical mean regret over training problems: one seeded episode per
/// problem per run, averaged. `runs` = 1 is the single-trajectory estimate.
template <EpisodePolicy P>
double evaluate_delta(const P& policy, std::span<const BanditProblem> problems, std::size_t horizon,
                      std::uint64_t seed, std::size_t runs = 1) {
  if (problems.empty()) throw PreconditionError("evaluate_delta: no training problems");
  if (runs == 0) throw PreconditionError("evaluate_delta: runs must be >= 1");
  double total = 0.0;
  P local = policy;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    for (std::size_t r = 0; r < runs; ++r) {
      Rng rng = make_rng(seed, {i, r});
      total += run_episode(problems[i], local, horizon, rng).regret;
    }
  }
  return total / static_cast<double>(problems.size() * runs);
}

struct EdaConfig {
  std::size_t iterations = 100;
  std::size_t population = 0;  // 0: max(8 dim, 40)
  std::size_t elites = 0;      // 0: population / 4
  std::size_t dim = 1;
  std::vector<double> init_means;      // empty: all zeros
  std::vector<double> init_variances;  // empty: all ones
  std::uint64_t seed = 0;

  /// i_max = 100, n_p = max(8 d, 40), b = n_p / 4.
  static EdaConfig defaults(std::size_t dim, std::uint64_t seed = 0,
                            std::vector<double> init_means = {}) {
    EdaConfig c;
    c.dim = dim;
    c.init_means = std::move(init_means);
    c.seed = seed;
    return c;
  }

  /// Fills population / elites left at 0 from the dimension.
  EdaConfig resolved() const {
    EdaConfig c = *this;
    if (c.population == 0) c.population = std::max<std::size_t>(8 * c.dim, 40);
    if (c.elites == 0) c.elites = c.population / 4;
    return c;
  }

  void validate() const {
    if (dim == 0) throw PreconditionError("EDA dimension must be >= 1");
    if (elites == 0 || elites > population)
      throw PreconditionError("EDA needs 1 <= elites <= population");
    if (!init_means.empty() && init_means.size() != dim)
      throw PreconditionError("EDA init_means size does not match dim");
    if (!init_variances.empty() && init_variances.size() != dim)
      throw PreconditionError("EDA init_variances size does not match dim");
  }
};

struct EdaIteration {
  std::vector<double> means;      // sampling distribution of this iteration
  std::vector<double> variances;
  double iteration_best = 0.0;    // best score among this iteration's candidates
  double best_score = 0.0;        // running minimum after this iteration
};

struct EdaResult {
  std::vector<double> best_theta;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<EdaIteration> trace;
  std::size_t evaluations = 0;
};

/// Univariate-Gaussian EDA minimizing `objective`. The objective is called
/// as objective(theta) or, if it accepts one, objective(theta, seed) with a
/// seed derived from (config.seed, iteration, candidate). Non-finite scores
/// rank as +infinity. Candidates of one iteration are scored in parallel, so
/// the objective must be safe to call concurrently.
template <class Objective>
EdaResult eda_optimize(Objective&& objective, const EdaConfig& requested) {
  const EdaConfig config = requested.resolved();
  config.validate();
  const std::size_t d = config.dim;
  std::vector<double> means = config.init_means.empty() ? std::vector<double>(d, 0.0)
                                                        : config.init_means;
  std::vector<double> variances =
      config.init_variances.empty() ? std::vector<double>(d, 1.0) : config.init_variances;

  Rng sampler = make_rng(config.seed, {stream::kTuning});
  EdaResult result;
  std::vector<std::vector<double>> population(config.population, std::vector<double>(d));
  std::vector<double> scores(config.population);
  std::vector<std::size_t> order(config.population);

  auto score_of = [&](std::size_t iteration, std::size_t j) {
    const std::span<const double> theta(population[j]);
    double s;
    if constexpr (std::is_invocable_r_v<double, Objective&, std::span<const double>, std::uint64_t>)
      s = objective(theta, derive_seed(config.seed, {iteration, j}));
    else
      s = objective(theta);
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };

  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (auto& theta : population)
      for (std::size_t p = 0; p < d; ++p) {
        // sigma^2 == 0 degenerates to the mean exactly.
        theta[p] = variances[p] > 0.0
                       ? std::normal_distribution<double>(means[p], std::sqrt(variances[p]))(sampler)
                       : means[p];
      }
    parallel_for(config.population, [&](std::size_t j) { scores[j] = score_of(it, j); });
    result.evaluations += config.population;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    EdaIteration rec{means, variances, scores[order.front()], 0.0};
    // Strict improvement keeps the earliest candidate on ties.
    for (std::size_t j = 0; j < config.population; ++j) {
      if (scores[j] < result.best_score || result.best_theta.empty()) {
        result.best_score = scores[j];
        result.best_theta = population[j];
      }
    }
    rec.best_score = result.best_score;
    result.trace.push_back(std::move(rec));

    const double b = static_cast<double>(config.elites);
    for (std::size_t p = 0; p < d; ++p) {
      // Shifted by the best elite so identical elites give their value back
      // exactly and a collapsed coordinate stays collapsed.
      const double x0 = population[order.front()][p];
      double shift = 0.0;
      for (std::size_t e = 0; e < config.elites; ++e) shift += population[order[e]][p] - x0;
      const double m = x0 + shift / b;
      double v = 0.0;
      for (std::size_t e = 0; e < config.elites; ++e) {
        const double dev = population[order[e]][p] - m;
        v += dev * dev;
      }
      means[p] = m;
      variances[p] = v / b;
    }
  }
  return result;
}

struct TunedPolicy {
  Policy policy;
  EdaResult optimization;
};

/// Tunes a policy's numeric parameters on training problems. The EDA starts
/// from the policy's current parameters (its documented defaults).
inline TunedPolicy tune_policy(const Policy& base, std::span<const BanditProblem> problems,
                               std::size_t horizon, EdaConfig config, std::size_t runs = 1) {
  const auto start = tunable_parameters(base);
  if (start.empty()) throw ConfigError("policy '" + describe(base) + "' has no tunable parameters");
  config.dim = start.size();
  if (config.init_means.empty()) config.init_means = start;
  auto objective = [&](std::span<const double> theta, std::uint64_t seed) {
    return evaluate_delta(with_parameters(base, theta), problems, horizon, seed, runs);
  };
  EdaResult res = eda_optimize(objective, config);
  return {with_parameters(base, res.best_theta), std::move(res)};
}

/// Learns a Power-P index from scratch (EDA means start at zero).
inline TunedPolicy learn_power_policy(std::size_t degree, std::span<const BanditProblem> problems,
                                      std::size_t horizon, EdaConfig config, std::size_t runs = 1) {
  const Policy base = Policy::power(ThetaVector::zeros(degree));
  config.dim = power_feature_count(degree);
  config.init_means.assign(config.dim, 0.0);
  auto objective = [&](std::span<const double> theta, std::uint64_t seed) {
    return evaluate_delta(with_parameters(base, theta), problems, horizon, seed, runs);
  };
  EdaResult res = eda_optimize(objective, config);
  return {with_parameters(base, res.best_theta), std::move(res)};
}

}  // namespace metabandit
