#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bandit.hpp"
#include "formula.hpp"
#include "power.hpp"
#include "random.hpp"

namespace metabandit {

// ---- index functions ----

// The *_lt forms take ln t precomputed, so a policy step evaluates the
// logarithm once rather than once per arm.
inline double index_ucb1_lt(const ArmStats& s, double lt, double c) {
  return s.mean + std::sqrt(c * lt / static_cast<double>(s.plays));
}

inline double index_ucb1(const ArmStats& s, std::size_t t, double c) {
  return index_ucb1_lt(s, std::log(static_cast<double>(t)), c);
}

/// With `variance_form` the min() uses sigma^2 (the original UCB1-Tuned
/// V_k); by default it uses sigma, as in the formula this library follows.
inline double index_ucb1_tuned_lt(const ArmStats& s, double lt, bool variance_form = false) {
  const double n = static_cast<double>(s.plays);
  const double spread = variance_form ? s.stddev * s.stddev : s.stddev;
  return s.mean + std::sqrt(lt / n * std::min(0.25, spread + std::sqrt(2.0 * lt / n)));
}

inline double index_ucb1_tuned(const ArmStats& s, std::size_t t, bool variance_form = false) {
  return index_ucb1_tuned_lt(s, std::log(static_cast<double>(t)), variance_form);
}

/// Requires plays >= 2; the policy's forced-play rule guarantees it.
inline double index_ucb1_normal(const ArmStats& s, std::size_t t) {
  const double n = static_cast<double>(s.plays);
  const double var = n * s.stddev * s.stddev / (n - 1.0);
  return s.mean + std::sqrt(16.0 * var * std::log(static_cast<double>(t) - 1.0) / n);
}

/// Number of plays below which UCB1-Normal forces an arm: ceil(8 ln t).
inline std::size_t ucb1_normal_min_plays(std::size_t t) {
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(static_cast<double>(t))));
}

inline double index_ucbv_lt(const ArmStats& s, double lt, double zeta, double c) {
  const double n = static_cast<double>(s.plays);
  return s.mean + std::sqrt(2.0 * s.stddev * s.stddev * zeta * lt / n) + c * 3.0 * zeta * lt / n;
}

inline double index_ucbv(const ArmStats& s, std::size_t t, double zeta, double c) {
  return index_ucbv_lt(s, std::log(static_cast<double>(t)), zeta, c);
}

/// Bernoulli KL divergence kl(p, q) with 0 log 0 = 0.
inline double bernoulli_kl(double p, double q) {
  double r = 0.0;
  if (p > 0.0) r += p * std::log(p / q);
  if (p < 1.0) r += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return r;
}

/// ln t + c ln ln t, with the second term dropped for t < 3.
inline double klucb_budget(std::size_t t, double c) {
  const double lt = std::log(static_cast<double>(t));
  return t < 3 ? lt : lt + c * std::log(lt);
}

inline constexpr int kKlucbMaxIterations = 100;
inline constexpr double kKlucbTolerance = 1e-9;

/// Largest q in [mean, 1] with plays * kl(mean, q) <= budget, by bisection.
/// A non-positive budget (possible for c < 0) leaves only q = mean.
inline double index_klucb_budget(const ArmStats& s, double budget) {
  const double p = s.mean;
  if (p >= 1.0) return 1.0;
  if (!(budget > 0.0)) return p;
  const double n = static_cast<double>(s.plays);
  double lo = p;
  double hi = 1.0;
  for (int i = 0; i < kKlucbMaxIterations && hi - lo > kKlucbTolerance; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (n * bernoulli_kl(p, mid) <= budget)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

inline double index_klucb(const ArmStats& s, std::size_t t, double c) {
  return index_klucb_budget(s, klucb_budget(t, c));
}

/// UCB2 epoch boundary tau(r) = ceil((1+alpha)^r).
inline double ucb2_tau(double alpha, std::size_t r) {
  return std::ceil(std::pow(1.0 + alpha, static_cast<double>(r)));
}

inline double ucb2_bonus(double alpha, std::size_t n, double tau) {
  return std::sqrt((1.0 + alpha) * std::log(std::numbers::e * static_cast<double>(n) / tau) /
                   (2.0 * tau));
}

/// epsilon_t = min(1, cK / (d^2 t)); negative or NaN ratios give 0.
inline double epsgreedy_epsilon(double c, double d, std::size_t k, std::size_t t) {
  const double eps = c * static_cast<double>(k) / (d * d * static_cast<double>(t));
  if (!(eps > 0.0)) return 0.0;
  return std::min(1.0, eps);
}

/// Argmax with exact ties broken uniformly at random. Non-finite values
/// count as -infinity. The RNG is only consumed when a tie occurs.
inline std::size_t select_argmax(std::span<const double> values, Rng& rng) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  double best_value = kNegInf;
  std::size_t ties = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = std::isfinite(values[k]) ? values[k] : kNegInf;
    if (v > best_value) {
      best = k;
      best_value = v;
      ties = 1;
    } else if (v == best_value) {
      ++ties;
      if (std::uniform_int_distribution<std::size_t>(0, ties - 1)(rng) == 0) best = k;
    }
  }
  return best;
}

// ---- policies ----

namespace detail {
// Fills `buf` with index(stats[k]) for every arm and returns the argmax.
template <class IndexFn>
std::size_t argmax_index(std::span<const ArmStats> stats, std::vector<double>& buf, Rng& rng,
                         IndexFn&& index) {
  buf.resize(stats.size());
  for (std::size_t k = 0; k < stats.size(); ++k) buf[k] = index(stats[k]);
  return select_argmax(buf, rng);
}
}  // namespace detail

struct Ucb1 {
  double c = 2.0;
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const double lt = std::log(static_cast<double>(t));
    return detail::argmax_index(s, buf, rng,
                                [&](const ArmStats& a) { return index_ucb1_lt(a, lt, c); });
  }
};

struct Ucb1Tuned {
  bool variance_form = false;
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const double lt = std::log(static_cast<double>(t));
    return detail::argmax_index(
        s, buf, rng, [&](const ArmStats& a) { return index_ucb1_tuned_lt(a, lt, variance_form); });
  }
};

struct Ucb1Normal {
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const std::size_t need = ucb1_normal_min_plays(t);
    for (std::size_t k = 0; k < s.size(); ++k)
      if (s[k].plays < need) return k;
    return detail::argmax_index(s, buf, rng,
                                [&](const ArmStats& a) { return index_ucb1_normal(a, t); });
  }
};

struct UcbV {
  double zeta = 1.0;
  double c = 1.0;
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const double lt = std::log(static_cast<double>(t));
    return detail::argmax_index(s, buf, rng,
                                [&](const ArmStats& a) { return index_ucbv_lt(a, lt, zeta, c); });
  }
};

struct KlUcb {
  double c = 0.0;
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const double budget = klucb_budget(t, c);
    return detail::argmax_index(s, buf, rng,
                                [&](const ArmStats& a) { return index_klucb_budget(a, budget); });
  }
};

// Epoch-based UCB2: a selected arm is replayed tau(r+1) - tau(r) times.
// Zero-length epochs leave the arm's index unchanged, so they are skipped
// in one jump to the next epoch that has plays. With alpha <= 0 tau never
// grows; each selection then plays the arm once.
struct Ucb2 {
  double alpha = 0.001;
  std::vector<std::size_t> epochs;
  std::size_t queued_arm = 0;
  std::size_t queued_plays = 0;
  std::vector<double> buf;

  void reset(std::size_t k) {
    epochs.assign(k, 0);
    queued_plays = 0;
  }

  // Smallest epoch m > r with tau(m) > tau(r), or r + 1 if tau is stuck.
  std::size_t next_nonempty_epoch(std::size_t r) const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) return r + 1;
    const double tau_r = ucb2_tau(alpha, r);
    if (ucb2_tau(alpha, r + 1) > tau_r) return r + 1;
    const double guess = std::floor(std::log(tau_r) / std::log1p(alpha));
    std::size_t m = guess > static_cast<double>(r) ? static_cast<std::size_t>(guess) : r + 1;
    while (m > r + 1 && ucb2_tau(alpha, m - 1) > tau_r) --m;
    while (ucb2_tau(alpha, m) <= tau_r) ++m;
    return m;
  }

  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    if (queued_plays > 0) {
      --queued_plays;
      return queued_arm;
    }
    const std::size_t n = t - 1;  // plays so far
    buf.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k)
      buf[k] = s[k].mean + ucb2_bonus(alpha, n, ucb2_tau(alpha, epochs[k]));
    const std::size_t j = select_argmax(buf, rng);
    const std::size_t next = next_nonempty_epoch(epochs[j]);
    const double len = ucb2_tau(alpha, next) - ucb2_tau(alpha, epochs[j]);
    epochs[j] = next;
    queued_arm = j;
    // NaN or sub-unit lengths (alpha <= 0) play once; huge ones are capped.
    queued_plays = len >= 1.0 ? static_cast<std::size_t>(std::min(len, 1e15)) - 1 : 0;
    return j;
  }
};

struct EpsGreedy {
  double c = 1.0;
  double d = 1.0;
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const double eps = epsgreedy_epsilon(c, d, s.size(), t);
    if (eps > 0.0 && uniform01(rng) < eps)
      return std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng);
    return detail::argmax_index(s, buf, rng, [](const ArmStats& a) { return a.mean; });
  }
};

inline FormulaInputs formula_inputs(const ArmStats& s, std::size_t t) {
  return {s.mean, s.stddev, static_cast<double>(s.plays), static_cast<double>(t)};
}

// Index given by a symbolic formula. Any INVALID evaluation is recorded and
// the arm is treated as -infinity for that step.
struct FormulaIndex {
  Formula formula;
  bool invalid = false;
  std::vector<double> stack;
  std::vector<double> buf;
  void reset(std::size_t) { invalid = false; }
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    return detail::argmax_index(s, buf, rng, [&](const ArmStats& a) {
      const auto v = eval_prefix(formula.symbols(), formula_inputs(a, t), stack);
      if (!v) {
        invalid = true;
        return std::numeric_limits<double>::quiet_NaN();
      }
      return *v;
    });
  }
};

struct PowerIndex {
  ThetaVector theta;
  std::vector<double> buf;
  void reset(std::size_t) {}
  std::size_t select(std::size_t t, std::span<const ArmStats> s, Rng& rng) {
    const double v1 = std::sqrt(std::log(static_cast<double>(t)));
    return detail::argmax_index(s, buf, rng,
                                [&](const ArmStats& a) { return index_power_v1(theta, a, v1); });
  }
};

/// A bandit strategy plus its episode-scoped state. Copy a configured
/// Policy to get an independent instance; run_episode resets it.
class Policy {
 public:
  using Variant =
      std::variant<Ucb1, Ucb1Tuned, Ucb1Normal, Ucb2, UcbV, KlUcb, EpsGreedy, FormulaIndex, PowerIndex>;

  Policy() : impl_(Ucb1Tuned{}) {}
  template <class P>
    requires std::is_constructible_v<Variant, P&&>
  Policy(P&& p) : impl_(std::forward<P>(p)) {}  // NOLINT(google-explicit-constructor)

  static Policy ucb1(double c) { return Ucb1{c, {}}; }
  static Policy ucb1_tuned(bool variance_form = false) { return Ucb1Tuned{variance_form, {}}; }
  static Policy ucb1_normal() { return Ucb1Normal{}; }
  static Policy ucb2(double alpha) { return Ucb2{alpha, {}, 0, 0, {}}; }
  static Policy ucbv(double zeta, double c) { return UcbV{zeta, c, {}}; }
  static Policy klucb(double c) { return KlUcb{c, {}}; }
  static Policy eps_greedy(double c, double d) { return EpsGreedy{c, d, {}}; }
  static Policy formula(Formula f) { return FormulaIndex{std::move(f), false, {}, {}}; }
  static Policy power(ThetaVector theta) { return PowerIndex{std::move(theta), {}}; }

  void reset(std::size_t k) {
    std::visit([k](auto& p) { p.reset(k); }, impl_);
  }
  std::size_t select(std::size_t t, std::span<const ArmStats> stats, Rng& rng) {
    return std::visit([&](auto& p) { return p.select(t, stats, rng); }, impl_);
  }
  bool saw_invalid() const {
    const auto* f = std::get_if<FormulaIndex>(&impl_);
    return f != nullptr && f->invalid;
  }

  const Variant& variant() const noexcept { return impl_; }
  Variant& variant() noexcept { return impl_; }

 private:
  Variant impl_;
};

}  // namespace metabandit
