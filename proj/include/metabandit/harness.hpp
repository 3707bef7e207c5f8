#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bandit.hpp"
#include "eda.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "policies.hpp"
#include "policy_spec.hpp"
#include "random.hpp"

namespace metabandit {

// ---- problem distributions ----

struct ProblemDistribution {
  enum class Kind { BernoulliUniform, TruncGaussianUniform };
  Kind kind = Kind::BernoulliUniform;
  std::size_t arms = 2;
  RegretBasis regret = RegretBasis::TrueMean;
};

inline std::string to_string(ProblemDistribution::Kind k) {
  return k == ProblemDistribution::Kind::BernoulliUniform ? "bernoulli" : "gaussian";
}

inline ProblemDistribution distribution_from_json(const nlohmann::json& j) {
  ProblemDistribution d;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    kind = j.value("kind", "bernoulli");
    d.arms = j.value("arms", std::size_t{2});
    d.regret = regret_basis_from_string(j.value("regret", std::string("true_mean")));
  } else {
    throw ConfigError("distribution must be a string or an object");
  }
  if (kind == "bernoulli")
    d.kind = ProblemDistribution::Kind::BernoulliUniform;
  else if (kind == "gaussian" || kind == "truncated_gaussian")
    d.kind = ProblemDistribution::Kind::TruncGaussianUniform;
  else
    throw ConfigError("unknown distribution '" + kind + "'");
  if (d.arms < 2) throw ConfigError("distribution needs at least two arms");
  return d;
}

inline nlohmann::json to_json(const ProblemDistribution& d) {
  return {{"kind", to_string(d.kind)}, {"arms", d.arms}, {"regret", to_string(d.regret)}};
}

/// Bernoulli: p ~ U[0,1] per arm. Gaussian: mu, sigma ~ U[0,1] per arm,
/// truncated to [0,1].
inline BanditProblem sample_problem(const ProblemDistribution& dist, Rng& rng) {
  std::vector<ArmDistribution> arms;
  arms.reserve(dist.arms);
  for (std::size_t k = 0; k < dist.arms; ++k) {
    if (dist.kind == ProblemDistribution::Kind::BernoulliUniform) {
      arms.emplace_back(Bernoulli{uniform01(rng)});
    } else {
      const double mu = uniform01(rng);
      const double sigma = uniform01(rng);
      arms.emplace_back(TruncatedGaussian{mu, sigma});
    }
  }
  return BanditProblem(std::move(arms), dist.regret);
}

inline std::vector<BanditProblem> sample_problems(const ProblemDistribution& dist, std::size_t count,
                                                  std::uint64_t seed) {
  std::vector<BanditProblem> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {i});
    out.push_back(sample_problem(dist, rng));
  }
  return out;
}

// ---- policy evaluation ----

struct PolicyEvaluation {
  double mean_regret = 0.0;
  double stderr_regret = 0.0;  // across problems
  std::vector<double> per_problem;
};

/// Mean regret over `runs` seeded episodes per problem. Episode (i, r) uses
/// the stream derived from (seed, i, r); the reduction is in problem order,
/// so results do not depend on the thread count.
template <EpisodePolicy P>
PolicyEvaluation evaluate_policy(const P& policy, std::span<const BanditProblem> problems,
                                 std::size_t horizon, std::size_t runs, std::uint64_t seed) {
  if (problems.empty()) throw PreconditionError("evaluate_policy: no problems");
  if (runs == 0) throw PreconditionError("evaluate_policy: runs must be >= 1");
  PolicyEvaluation out;
  out.per_problem.assign(problems.size(), 0.0);
  parallel_for(problems.size(), [&](std::size_t i) {
    P local = policy;
    double sum = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      Rng rng = make_rng(seed, {i, r});
      sum += run_episode(problems[i], local, horizon, rng).regret;
    }
    out.per_problem[i] = sum / static_cast<double>(runs);
  });
  const double n = static_cast<double>(problems.size());
  double sum = 0.0;
  for (double v : out.per_problem) sum += v;
  out.mean_regret = sum / n;
  double ss = 0.0;
  for (double v : out.per_problem) ss += (v - out.mean_regret) * (v - out.mean_regret);
  out.stderr_regret = problems.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

/// Percentage of problems where `policy` has strictly lower per-problem
/// mean regret than `baseline`. Ties are not wins.
inline double percent_wins(std::span<const double> policy, std::span<const double> baseline) {
  if (policy.size() != baseline.size() || policy.empty())
    throw PreconditionError("percent_wins: regret vectors must be non-empty and equal length");
  std::size_t wins = 0;
  for (std::size_t i = 0; i < policy.size(); ++i) wins += policy[i] < baseline[i] ? 1 : 0;
  return 100.0 * static_cast<double>(wins) / static_cast<double>(policy.size());
}

template <EpisodePolicy P, EpisodePolicy B>
double percent_wins(const P& policy, const B& baseline, std::span<const BanditProblem> problems,
                    std::size_t horizon, std::size_t runs, std::uint64_t policy_seed,
                    std::uint64_t baseline_seed) {
  const auto a = evaluate_policy(policy, problems, horizon, runs, policy_seed);
  const auto b = evaluate_policy(baseline, problems, horizon, runs, baseline_seed);
  return percent_wins(a.per_problem, b.per_problem);
}

/// Common random numbers: both policies see the same episode seeds.
template <EpisodePolicy P, EpisodePolicy B>
double percent_wins(const P& policy, const B& baseline, std::span<const BanditProblem> problems,
                    std::size_t horizon, std::size_t runs, std::uint64_t seed) {
  return percent_wins(policy, baseline, problems, horizon, runs, seed, seed);
}

// ---- experiments ----

struct TrainingSpec {
  enum class Mode { None, Tune, LearnPower };
  Mode mode = Mode::None;
  std::optional<std::size_t> train_horizon;  // nullopt: train at each test horizon
  std::size_t power_degree = 1;
  std::size_t iterations = 100;
  std::size_t train_runs = 1;
};

struct PolicyEntry {
  std::string name;
  std::string policy;  // spec string; the starting point when trained
  TrainingSpec training;
};

struct ExperimentSpec {
  ProblemDistribution train_distribution;
  ProblemDistribution test_distribution;
  std::size_t n_train = 100;
  std::size_t n_test = 1000;
  std::size_t runs_per_problem = 100;
  std::vector<std::size_t> horizons = {10, 100, 1000};
  std::vector<PolicyEntry> policies;
  std::string baseline;  // policy name for win rates; empty: none
  std::uint64_t master_seed = 0;
  // All policies see the same per-(problem, run) episode seeds at a given
  // horizon. Off: every policy gets its own evaluation stream.
  bool common_random_numbers = true;

  void validate() const {
    if (n_train == 0 || n_test == 0 || runs_per_problem == 0)
      throw ConfigError("n_train, n_test and runs_per_problem must be >= 1");
    if (horizons.empty()) throw ConfigError("at least one horizon is required");
    for (auto t : horizons)
      if (t < test_distribution.arms) throw ConfigError("horizon shorter than the arm count");
    if (policies.empty()) throw ConfigError("at least one policy is required");
    bool found = baseline.empty();
    for (const auto& p : policies) {
      if (p.name.empty()) throw ConfigError("every policy needs a name");
      found |= p.name == baseline;
      if (p.training.iterations == 0 || p.training.train_runs == 0)
        throw ConfigError("policy '" + p.name + "': iterations and train_runs must be >= 1");
    }
    if (!found) throw ConfigError("baseline '" + baseline + "' is not among the policies");
  }
};

inline ExperimentSpec experiment_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  try {
    if (j.contains("train_distribution"))
      s.train_distribution = distribution_from_json(j["train_distribution"]);
    s.test_distribution = j.contains("test_distribution")
                              ? distribution_from_json(j["test_distribution"])
                              : s.train_distribution;
    s.n_train = j.value("n_train", s.n_train);
    s.n_test = j.value("n_test", s.n_test);
    s.runs_per_problem = j.value("runs_per_problem", s.runs_per_problem);
    if (j.contains("horizons")) s.horizons = j["horizons"].get<std::vector<std::size_t>>();
    s.baseline = j.value("baseline", std::string{});
    s.master_seed = j.value("master_seed", std::uint64_t{0});
    s.common_random_numbers = j.value("common_random_numbers", true);
    for (const auto& p : j.at("policies")) {
      PolicyEntry e;
      e.name = p.at("name").get<std::string>();
      e.policy = p.value("policy", std::string{});
      auto read_training = [&](const nlohmann::json& t, TrainingSpec::Mode mode) {
        e.training.mode = mode;
        if (t.contains("train_horizon") && !t["train_horizon"].is_string())
          e.training.train_horizon = t["train_horizon"].get<std::size_t>();
        else if (t.contains("train_horizon") && t["train_horizon"].get<std::string>() != "match")
          throw ConfigError("train_horizon must be an integer or \"match\"");
        e.training.iterations = t.value("iterations", std::size_t{100});
        e.training.train_runs = t.value("train_runs", std::size_t{1});
        e.training.power_degree = t.value("P", std::size_t{1});
      };
      if (p.contains("tune")) read_training(p["tune"], TrainingSpec::Mode::Tune);
      if (p.contains("learn_power")) read_training(p["learn_power"], TrainingSpec::Mode::LearnPower);
      if (e.training.mode != TrainingSpec::Mode::LearnPower && e.policy.empty())
        throw ConfigError("policy '" + e.name + "' needs a \"policy\" spec string");
      s.policies.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment file: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json pol = nlohmann::json::array();
  for (const auto& p : s.policies) {
    nlohmann::json e = {{"name", p.name}, {"policy", p.policy}};
    if (p.training.mode != TrainingSpec::Mode::None) {
      nlohmann::json t = {{"iterations", p.training.iterations},
                          {"train_runs", p.training.train_runs}};
      if (p.training.train_horizon)
        t["train_horizon"] = *p.training.train_horizon;
      else
        t["train_horizon"] = "match";
      if (p.training.mode == TrainingSpec::Mode::LearnPower) {
        t["P"] = p.training.power_degree;
        e["learn_power"] = t;
      } else {
        e["tune"] = t;
      }
    }
    pol.push_back(e);
  }
  return {{"train_distribution", to_json(s.train_distribution)},
          {"test_distribution", to_json(s.test_distribution)},
          {"n_train", s.n_train},
          {"n_test", s.n_test},
          {"runs_per_problem", s.runs_per_problem},
          {"horizons", s.horizons},
          {"baseline", s.baseline},
          {"master_seed", s.master_seed},
          {"common_random_numbers", s.common_random_numbers},
          {"policies", pol}};
}

struct ResultRow {
  std::string policy;
  std::string resolved;  // policy spec after training
  std::size_t horizon = 0;
  std::optional<std::size_t> train_horizon;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  std::optional<double> win_pct;  // vs baseline
  std::uint64_t eval_seed = 0;
};

struct TrainingRecord {
  std::string policy;
  std::size_t train_horizon = 0;
  std::vector<double> parameters;
  double train_score = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  bool complete = false;
  std::string failed_stage;
  std::string error;
  std::uint64_t train_problem_seed = 0;
  std::uint64_t test_problem_seed = 0;
  std::vector<TrainingRecord> training;
  std::vector<ResultRow> rows;
};

namespace detail {
inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}
}  // namespace detail

/// CSV with one row per policy x horizon. Fixed formatting, so equal
/// reports give equal bytes.
inline std::string to_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "policy,horizon,train_horizon,mean_regret,stderr,win_pct\n";
  for (const auto& row : r.rows) {
    os << '"' << row.policy << '"' << ',' << row.horizon << ','
       << (row.train_horizon ? std::to_string(*row.train_horizon) : "") << ','
       << detail::fixed(row.mean_regret) << ',' << detail::fixed(row.stderr_regret) << ','
       << (row.win_pct ? detail::fixed(*row.win_pct, 2) : "") << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json e = {{"policy", row.policy},       {"resolved", row.resolved},
                        {"horizon", row.horizon},     {"mean_regret", row.mean_regret},
                        {"stderr", row.stderr_regret}, {"eval_seed", row.eval_seed}};
    if (row.train_horizon) e["train_horizon"] = *row.train_horizon;
    if (row.win_pct) e["win_pct"] = *row.win_pct;
    rows.push_back(e);
  }
  nlohmann::json training = nlohmann::json::array();
  for (const auto& t : r.training)
    training.push_back({{"policy", t.policy},
                        {"train_horizon", t.train_horizon},
                        {"parameters", t.parameters},
                        {"train_score", t.train_score},
                        {"seed", t.seed}});
  nlohmann::json out = {{"status", r.complete ? "complete" : "partial"},
                        {"config", to_json(r.spec)},
                        {"seeds",
                         {{"master", r.spec.master_seed},
                          {"train_problems", r.train_problem_seed},
                          {"test_problems", r.test_problem_seed}}},
                        {"training", training},
                        {"results", rows}};
  if (!r.complete) {
    out["failed_stage"] = r.failed_stage;
    out["error"] = r.error;
  }
  return out;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  try {
    r.spec = experiment_from_json(j.at("config"));
    r.complete = j.value("status", "partial") == "complete";
    r.failed_stage = j.value("failed_stage", "");
    r.error = j.value("error", "");
    r.train_problem_seed = j.at("seeds").value("train_problems", std::uint64_t{0});
    r.test_problem_seed = j.at("seeds").value("test_problems", std::uint64_t{0});
    for (const auto& t : j.value("training", nlohmann::json::array()))
      r.training.push_back({t.at("policy"), t.at("train_horizon"),
                            t.at("parameters").get<std::vector<double>>(), t.at("train_score"),
                            t.at("seed")});
    for (const auto& e : j.at("results")) {
      ResultRow row;
      row.policy = e.at("policy");
      row.resolved = e.value("resolved", "");
      row.horizon = e.at("horizon");
      if (e.contains("train_horizon")) row.train_horizon = e["train_horizon"].get<std::size_t>();
      row.mean_regret = e.at("mean_regret");
      row.stderr_regret = e.at("stderr");
      if (e.contains("win_pct")) row.win_pct = e["win_pct"].get<double>();
      row.eval_seed = e.value("eval_seed", std::uint64_t{0});
      r.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report file: ") + e.what());
  }
  return r;
}

/// Seed layout under one master seed. Training and test problems come from
/// disjoint stream families, so no test problem can reach a tuning objective.
struct ExperimentSeeds {
  std::uint64_t master = 0;
  std::uint64_t train_problems() const { return derive_seed(master, {stream::kTrainProblems}); }
  std::uint64_t test_problems() const { return derive_seed(master, {stream::kTestProblems}); }
  std::uint64_t tuning(std::size_t policy, std::size_t train_horizon) const {
    return derive_seed(master, {stream::kTuning, policy, train_horizon});
  }
  std::uint64_t evaluation(std::size_t policy, std::size_t horizon,
                           std::size_t train_horizon) const {
    return derive_seed(master, {stream::kEvaluation, policy, horizon, train_horizon});
  }
};

/// Runs training stages, evaluates every policy at every horizon on the
/// test set and computes win rates against the baseline. A failing stage
/// stops the run and leaves a partial report.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentReport report;
  report.spec = spec;
  const ExperimentSeeds seeds{spec.master_seed};
  report.train_problem_seed = seeds.train_problems();
  report.test_problem_seed = seeds.test_problems();
  std::string stage = "sample-problems";
  try {
    const auto train = sample_problems(spec.train_distribution, spec.n_train, seeds.train_problems());
    const auto test = sample_problems(spec.test_distribution, spec.n_test, seeds.test_problems());

    // (policy index, horizon) -> per-problem regrets, for win rates.
    std::vector<std::vector<std::vector<double>>> per_problem(spec.policies.size());
    std::vector<std::vector<std::size_t>> row_index(spec.policies.size());

    for (std::size_t pi = 0; pi < spec.policies.size(); ++pi) {
      const PolicyEntry& entry = spec.policies[pi];
      per_problem[pi].resize(spec.horizons.size());
      row_index[pi].resize(spec.horizons.size());
      // One trained policy per training horizon; reused across test horizons.
      std::vector<std::pair<std::size_t, Policy>> trained;
      auto policy_for = [&](std::size_t train_t) -> Policy {
        for (const auto& [t, p] : trained)
          if (t == train_t) return p;
        stage = "train:" + entry.name + "@T=" + std::to_string(train_t);
        EdaConfig cfg;
        cfg.iterations = entry.training.iterations;
        cfg.seed = seeds.tuning(pi, train_t);
        TunedPolicy tp = entry.training.mode == TrainingSpec::Mode::Tune
                             ? tune_policy(parse_policy(entry.policy), train, train_t, cfg,
                                           entry.training.train_runs)
                             : learn_power_policy(entry.training.power_degree, train, train_t, cfg,
                                                  entry.training.train_runs);
        report.training.push_back({entry.name, train_t, tp.optimization.best_theta,
                                   tp.optimization.best_score, cfg.seed});
        trained.emplace_back(train_t, tp.policy);
        return tp.policy;
      };
      for (std::size_t hi = 0; hi < spec.horizons.size(); ++hi) {
        const std::size_t horizon = spec.horizons[hi];
        std::optional<std::size_t> train_t;
        Policy policy;
        if (entry.training.mode == TrainingSpec::Mode::None) {
          stage = "parse:" + entry.name;
          policy = parse_policy(entry.policy);
        } else {
          train_t = entry.training.train_horizon.value_or(horizon);
          policy = policy_for(*train_t);
        }
        stage = "evaluate:" + entry.name + "@T=" + std::to_string(horizon);
        const std::uint64_t eval_seed =
            spec.common_random_numbers ? seeds.evaluation(0, horizon, 0)
                                       : seeds.evaluation(pi + 1, horizon, train_t.value_or(0));
        auto ev = evaluate_policy(policy, test, horizon, spec.runs_per_problem, eval_seed);
        ResultRow row;
        row.policy = entry.name;
        row.resolved = describe(policy);
        row.horizon = horizon;
        row.train_horizon = train_t;
        row.mean_regret = ev.mean_regret;
        row.stderr_regret = ev.stderr_regret;
        row.eval_seed = eval_seed;
        row_index[pi][hi] = report.rows.size();
        report.rows.push_back(std::move(row));
        per_problem[pi][hi] = std::move(ev.per_problem);
      }
    }
    stage = "win-rates";
    if (!spec.baseline.empty()) {
      std::size_t base = 0;
      while (spec.policies[base].name != spec.baseline) ++base;
      for (std::size_t pi = 0; pi < spec.policies.size(); ++pi)
        for (std::size_t hi = 0; hi < spec.horizons.size(); ++hi)
          report.rows[row_index[pi][hi]].win_pct =
              percent_wins(per_problem[pi][hi], per_problem[base][hi]);
    }
    report.complete = true;
  } catch (const std::exception& e) {
    report.complete = false;
    report.failed_stage = stage;
    report.error = e.what();
  }
  return report;
}

}  // namespace metabandit
