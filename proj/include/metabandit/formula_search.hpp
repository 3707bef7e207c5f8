#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bandit.hpp"
#include "errors.hpp"
#include "formula.hpp"
#include "parallel.hpp"
#include "policies.hpp"
#include "random.hpp"

namespace metabandit {

struct RankedFormula {
  std::size_t arm = 0;  // index into the candidate list
  Formula formula;
  double mean_reward = 0.0;
  double reward_stddev = 0.0;
  std::uint64_t pulls = 0;
};

/// Best-formula identification framed as a bandit whose arms are formulas.
/// Pulling arm k runs one episode of the formula's index policy on training
/// problem (pulls_k mod N) and yields reward 1 - regret / T clipped to [0,1];
/// an episode in which the formula went INVALID yields 0.
class MetaBandit {
 public:
  MetaBandit(std::vector<Formula> formulas, std::span<const BanditProblem> problems,
             std::size_t horizon, std::uint64_t seed)
      : problems_(problems), horizon_(horizon), seed_(seed) {
    if (problems_.empty()) throw PreconditionError("meta-bandit needs training problems");
    for (const auto& p : problems_)
      if (horizon_ < p.num_arms()) throw PreconditionError("meta-bandit horizon shorter than K");
    policies_.reserve(formulas.size());
    formulas_ = std::move(formulas);
    for (const auto& f : formulas_) policies_.push_back(Policy::formula(f));
    stats_.resize(formulas_.size());
  }

  std::size_t num_arms() const noexcept { return formulas_.size(); }
  const std::vector<ArmStats>& stats() const noexcept { return stats_; }
  const std::vector<Formula>& formulas() const noexcept { return formulas_; }
  std::uint64_t total_pulls() const noexcept { return total_pulls_; }

  /// Training problem the next pull of `arm` will use.
  std::size_t next_problem(std::size_t arm) const { return stats_.at(arm).plays % problems_.size(); }

  /// Episode seed of the given pull of `arm`.
  std::uint64_t episode_seed(std::size_t arm, std::uint64_t pull) const {
    return derive_seed(seed_, {stream::kMetaBandit, arm, pull});
  }

  /// Reward the pull would produce, without recording it. Safe to call
  /// concurrently for distinct arms.
  double simulate(std::size_t arm, Policy& policy) const {
    const std::size_t i = next_problem(arm);
    Rng rng(episode_seed(arm, stats_[arm].plays));
    const EpisodeResult res = run_episode(problems_[i], policy, horizon_, rng);
    if (res.invalid_index) return 0.0;
    return std::clamp(1.0 - res.regret / static_cast<double>(horizon_), 0.0, 1.0);
  }

  void record(std::size_t arm, double reward) {
    stats_[arm] = update_stats(stats_[arm], reward);
    ++total_pulls_;
  }

  double pull(std::size_t arm) {
    if (arm >= formulas_.size()) throw PreconditionError("meta-bandit arm out of range");
    const double r = simulate(arm, policies_[arm]);
    record(arm, r);
    return r;
  }

  Policy& policy(std::size_t arm) { return policies_[arm]; }

  /// Arms sorted by empirical mean reward (descending); ties by more pulls,
  /// then by candidate index.
  std::vector<RankedFormula> ranking() const {
    std::vector<std::size_t> order(formulas_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& sa = stats_[a];
      const auto& sb = stats_[b];
      const double ma = sa.plays ? sa.mean : -1.0;
      const double mb = sb.plays ? sb.mean : -1.0;
      if (ma != mb) return ma > mb;
      return sa.plays > sb.plays;
    });
    std::vector<RankedFormula> out;
    out.reserve(order.size());
    for (std::size_t k : order)
      out.push_back({k, formulas_[k], stats_[k].mean, stats_[k].stddev, stats_[k].plays});
    return out;
  }

 private:
  std::vector<Formula> formulas_;
  std::vector<Policy> policies_;
  std::span<const BanditProblem> problems_;
  std::size_t horizon_;
  std::uint64_t seed_;
  std::vector<ArmStats> stats_;
  std::uint64_t total_pulls_ = 0;
};

struct SearchConfig {
  std::size_t horizon = 100;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  // Arms pulled per round in batched mode; 1 is the sequential algorithm.
  std::size_t batch = 1;
};

/// Pulls every arm once, then spends the rest of the budget with UCB1-Tuned
/// over the formula arms, and returns the ranking by mean reward.
inline std::vector<RankedFormula> search_best(std::vector<Formula> candidates,
                                              std::span<const BanditProblem> problems,
                                              const SearchConfig& config) {
  const std::size_t m = candidates.size();
  if (m == 0) throw PreconditionError("search_best: no candidate formulas");
  if (config.budget < m)
    throw PreconditionError("search_best: budget " + std::to_string(config.budget) +
                            " cannot initialize " + std::to_string(m) + " arms");
  if (config.batch == 0) throw PreconditionError("search_best: batch must be >= 1");
  MetaBandit meta(std::move(candidates), problems, config.horizon, config.seed);
  for (std::size_t k = 0; k < m; ++k) meta.pull(k);

  Rng tie_rng = make_rng(config.seed, {stream::kMetaBandit, 0x7469ULL});
  std::vector<double> index(m);
  std::vector<std::size_t> picks;
  std::vector<double> rewards;
  std::uint64_t step = m;
  while (step < config.budget) {
    const std::size_t t = static_cast<std::size_t>(step) + 1;
    const auto& st = meta.stats();
    for (std::size_t k = 0; k < m; ++k) index[k] = index_ucb1_tuned(st[k], t);
    const std::size_t want =
        static_cast<std::size_t>(std::min<std::uint64_t>(config.batch, config.budget - step));
    picks.clear();
    if (want == 1) {
      picks.push_back(select_argmax(index, tie_rng));
    } else {
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(std::min(want, m)),
                        order.end(), [&](std::size_t a, std::size_t b) {
                          return index[a] > index[b];
                        });
      picks.assign(order.begin(), order.begin() + std::ptrdiff_t(std::min(want, m)));
    }
    rewards.assign(picks.size(), 0.0);
    if (picks.size() == 1) {
      rewards[0] = meta.simulate(picks[0], meta.policy(picks[0]));
    } else {
      parallel_for(picks.size(), [&](std::size_t j) {
        Policy local = meta.policy(picks[j]);
        rewards[j] = meta.simulate(picks[j], local);
      });
    }
    for (std::size_t j = 0; j < picks.size(); ++j) meta.record(picks[j], rewards[j]);
    step += picks.size();
  }
  return meta.ranking();
}

/// Uniform allocation baseline: arms pulled cyclically until the budget is
/// spent.
inline std::vector<RankedFormula> search_round_robin(std::vector<Formula> candidates,
                                                     std::span<const BanditProblem> problems,
                                                     const SearchConfig& config) {
  const std::size_t m = candidates.size();
  if (m == 0) throw PreconditionError("search_round_robin: no candidate formulas");
  MetaBandit meta(std::move(candidates), problems, config.horizon, config.seed);
  for (std::uint64_t s = 0; s < config.budget; ++s) meta.pull(static_cast<std::size_t>(s % m));
  return meta.ranking();
}

}  // namespace metabandit
