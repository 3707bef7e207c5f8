// Command-line front end: problem sampling, policy evaluation, tuning and
// learning, the symbolic formula pipeline, and full experiments.
#include <metabandit/metabandit.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace mb = metabandit;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

// Where a subcommand gets its bandit problems from: a JSONL file, or a
// seeded draw from a named distribution.
struct ProblemSource {
  std::string file;
  std::string distribution = "bernoulli";
  std::size_t arms = 2;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string regret = "true_mean";

  void add_to(CLI::App* cmd, const std::string& what) {
    cmd->add_option("--problems", file, "JSONL file of " + what + " problems");
    cmd->add_option("--distribution", distribution, "bernoulli or gaussian")
        ->check(CLI::IsMember({"bernoulli", "gaussian"}));
    cmd->add_option("--arms", arms, "arms per sampled problem");
    cmd->add_option("--count", count, "number of sampled problems");
    cmd->add_option("--problem-seed", seed, "seed of the sampled problems");
    cmd->add_option("--regret", regret, "regret basis of sampled problems")
        ->check(CLI::IsMember({"true_mean", "location"}));
  }

  std::vector<mb::BanditProblem> load() const {
    if (!file.empty()) return read_problems(file);
    const auto dist = mb::distribution_from_json({{"kind", distribution}, {"arms", arms}, {"regret", regret}});
    return mb::sample_problems(dist, count, seed);
  }

  static std::vector<mb::BanditProblem> read_problems(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mb::ConfigError("cannot open problem file '" + path + "'");
    std::vector<mb::BanditProblem> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(mb::problem_from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw mb::ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    if (out.empty()) throw mb::ConfigError("problem file '" + path + "' is empty");
    return out;
  }
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mb::ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw mb::ConfigError(path + ": " + e.what());
  }
}

// Writes to `path`, or stdout when empty or "-".
void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw mb::ConfigError("cannot write '" + path + "'");
  out << text;
}

json trace_json(const mb::EdaResult& r) {
  json it = json::array();
  for (std::size_t i = 0; i < r.trace.size(); ++i)
    it.push_back({{"iteration", i},
                  {"means", r.trace[i].means},
                  {"variances", r.trace[i].variances},
                  {"iteration_best", r.trace[i].iteration_best},
                  {"best_score", r.trace[i].best_score}});
  return {{"iterations", it}, {"best_theta", r.best_theta}, {"best_score", r.best_score},
          {"evaluations", r.evaluations}};
}

struct EdaOptions {
  std::size_t iterations = 100;
  std::size_t population = 0;
  std::size_t elites = 0;
  std::size_t train_runs = 1;
  std::size_t horizon = 100;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-T,--horizon", horizon, "training horizon")->required();
    cmd->add_option("--iterations", iterations, "EDA iterations");
    cmd->add_option("--population", population, "candidates per iteration (0: max(8d, 40))");
    cmd->add_option("--elites", elites, "elite count (0: population / 4)");
    cmd->add_option("--train-runs", train_runs, "episodes per training problem per candidate");
    cmd->add_option("--seed", seed, "EDA seed");
  }
  mb::EdaConfig config() const {
    mb::EdaConfig c;
    c.iterations = iterations;
    c.population = population;
    c.elites = elites;
    c.seed = seed;
    return c;
  }
};

std::string jsonl_line(const json& j) { return j.dump() + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning of exploration/exploitation strategies for multi-armed bandits"};
  app.require_subcommand(1);

  // sample-problems
  auto* sample_cmd = app.add_subcommand("sample-problems", "draw bandit problems as JSONL");
  ProblemSource sample_src;
  std::string sample_out;
  sample_cmd->add_option("--distribution", sample_src.distribution, "bernoulli or gaussian")
      ->check(CLI::IsMember({"bernoulli", "gaussian"}));
  sample_cmd->add_option("--arms", sample_src.arms, "arms per problem");
  sample_cmd->add_option("--count", sample_src.count, "number of problems");
  sample_cmd->add_option("--seed", sample_src.seed, "problem seed");
  sample_cmd->add_option("--regret", sample_src.regret, "regret basis: true_mean or location")
      ->check(CLI::IsMember({"true_mean", "location"}));
  sample_cmd->add_option("-o,--out", sample_out, "output JSONL (default stdout)");

  // eval-policy
  auto* eval_cmd = app.add_subcommand("eval-policy", "mean regret of a policy on a problem set");
  ProblemSource eval_src;
  eval_src.count = 1000;
  std::string eval_policy;
  std::vector<std::size_t> eval_horizons;
  std::size_t eval_runs = 100;
  std::uint64_t eval_seed = 0;
  std::string eval_baseline, eval_out;
  bool eval_per_problem = false;
  eval_src.add_to(eval_cmd, "test");
  eval_cmd->add_option("-p,--policy", eval_policy, "policy spec, e.g. ucb1:C=2")->required();
  eval_cmd->add_option("-T,--horizon", eval_horizons, "horizon(s); several give a regret series")
      ->required();
  eval_cmd->add_option("--runs", eval_runs, "episodes per problem");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--baseline", eval_baseline, "policy spec for percentage of wins");
  eval_cmd->add_flag("--per-problem", eval_per_problem, "include per-problem mean regrets");
  eval_cmd->add_option("-o,--out", eval_out, "output JSON (default stdout)");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "EDA-tune a generic policy's parameters");
  ProblemSource tune_src;
  EdaOptions tune_opts;
  std::string tune_policy, tune_trace, tune_out;
  tune_src.add_to(tune_cmd, "training");
  tune_opts.add_to(tune_cmd);
  tune_cmd->add_option("-p,--policy", tune_policy, "policy spec; its parameters seed the EDA")
      ->required();
  tune_cmd->add_option("--trace", tune_trace, "write the per-iteration EDA trace (JSON)");
  tune_cmd->add_option("-o,--out", tune_out, "output JSON (default stdout)");

  // learn-numeric
  auto* learn_cmd = app.add_subcommand("learn-numeric", "EDA-learn a Power-P index policy");
  ProblemSource learn_src;
  EdaOptions learn_opts;
  std::size_t learn_degree = 1;
  std::string learn_trace, learn_out;
  learn_src.add_to(learn_cmd, "training");
  learn_opts.add_to(learn_cmd);
  learn_cmd->add_option("-P,--degree", learn_degree, "polynomial degree P");
  learn_cmd->add_option("--trace", learn_trace, "write the per-iteration EDA trace (JSON)");
  learn_cmd->add_option("-o,--out", learn_out, "theta JSON (default stdout)");

  // enumerate-formulas
  auto* enum_cmd = app.add_subcommand("enumerate-formulas", "list or count all formulas up to a length");
  std::size_t enum_len = 3;
  bool enum_count_only = false;
  std::string enum_out;
  enum_cmd->add_option("-L,--max-length", enum_len, "maximal formula length")->required();
  enum_cmd->add_flag("--count-only", enum_count_only, "print counts per length only");
  enum_cmd->add_option("-o,--out", enum_out, "output (default stdout)");

  // cluster-formulas
  auto* cluster_cmd =
      app.add_subcommand("cluster-formulas", "partition formulas into rank-equivalence classes");
  std::size_t cluster_len = 5, cluster_samples = 1024;
  std::uint64_t cluster_seed = 0;
  std::string cluster_out;
  bool cluster_naive = false;
  cluster_cmd->add_option("-L,--max-length", cluster_len, "maximal formula length")->required();
  cluster_cmd->add_option("-d,--samples", cluster_samples, "sample points");
  cluster_cmd->add_option("--seed", cluster_seed, "sample seed");
  cluster_cmd->add_flag("--naive", cluster_naive, "evaluate every formula independently");
  cluster_cmd->add_option("-o,--out", cluster_out, "representatives JSONL")->required();

  // search-formula
  auto* search_cmd = app.add_subcommand("search-formula", "race candidate formulas with UCB1-Tuned");
  ProblemSource search_src;
  std::string search_in, search_out;
  mb::SearchConfig search_cfg;
  std::size_t search_top = 0;
  bool search_round_robin = false;
  search_src.add_to(search_cmd, "training");
  search_cmd->add_option("-i,--candidates", search_in, "representatives JSONL")->required();
  search_cmd->add_option("-T,--horizon", search_cfg.horizon, "episode horizon");
  search_cmd->add_option("-b,--budget", search_cfg.budget, "total meta-bandit pulls")->required();
  search_cmd->add_option("--seed", search_cfg.seed, "search seed");
  search_cmd->add_option("--batch", search_cfg.batch, "arms pulled per round (1: sequential)");
  search_cmd->add_flag("--round-robin", search_round_robin, "uniform allocation instead");
  search_cmd->add_option("--top", search_top, "only write the best k formulas");
  search_cmd->add_option("-o,--out", search_out, "ranked JSONL (default stdout)");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "run an experiment file end to end");
  std::string bench_config, bench_csv, bench_json;
  bench_cmd->add_option("-c,--config", bench_config, "experiment JSON")->required();
  bench_cmd->add_option("--csv", bench_csv, "CSV table (default stdout)");
  bench_cmd->add_option("--json", bench_json, "full JSON report");

  // report
  auto* report_cmd = app.add_subcommand("report", "render a saved JSON report");
  std::string report_in, report_format = "csv", report_out;
  report_cmd->add_option("-i,--input", report_in, "JSON report")->required();
  report_cmd->add_option("--format", report_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  report_cmd->add_option("-o,--out", report_out, "output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::string stage = "setup";
  try {
    if (*sample_cmd) {
      stage = "sample-problems";
      std::string out;
      for (const auto& p : sample_src.load()) out += jsonl_line(mb::to_json(p));
      write_text(sample_out, out);
    } else if (*eval_cmd) {
      const mb::Policy policy = mb::parse_policy(eval_policy);
      std::optional<mb::Policy> baseline;
      if (!eval_baseline.empty()) baseline = mb::parse_policy(eval_baseline);
      const auto problems = eval_src.load();
      stage = "eval-policy";
      json rows = json::array();
      for (std::size_t T : eval_horizons) {
        const auto ev = mb::evaluate_policy(policy, problems, T, eval_runs, eval_seed);
        json row = {{"horizon", T}, {"mean_regret", ev.mean_regret}, {"stderr", ev.stderr_regret}};
        if (baseline) {
          const auto b = mb::evaluate_policy(*baseline, problems, T, eval_runs, eval_seed);
          row["baseline_mean_regret"] = b.mean_regret;
          row["win_pct"] = mb::percent_wins(ev.per_problem, b.per_problem);
        }
        if (eval_per_problem) row["per_problem"] = ev.per_problem;
        rows.push_back(row);
      }
      json out = {{"policy", mb::describe(policy)}, {"problems", problems.size()},
                  {"runs", eval_runs},              {"seed", eval_seed},
                  {"results", rows}};
      if (baseline) out["baseline"] = mb::describe(*baseline);
      write_text(eval_out, out.dump(2) + "\n");
    } else if (*tune_cmd) {
      const mb::Policy base = mb::parse_policy(tune_policy);
      const auto problems = tune_src.load();
      stage = "tune";
      const auto tp = mb::tune_policy(base, problems, tune_opts.horizon, tune_opts.config(),
                                      tune_opts.train_runs);
      if (!tune_trace.empty()) write_text(tune_trace, trace_json(tp.optimization).dump(2) + "\n");
      const json out = {{"policy", mb::describe(tp.policy)},
                        {"parameters", tp.optimization.best_theta},
                        {"train_score", tp.optimization.best_score},
                        {"train_horizon", tune_opts.horizon},
                        {"seed", tune_opts.seed}};
      write_text(tune_out, out.dump(2) + "\n");
    } else if (*learn_cmd) {
      if (learn_degree > 8) throw mb::ConfigError("--degree must be <= 8");
      const auto problems = learn_src.load();
      stage = "learn-numeric";
      const auto tp = mb::learn_power_policy(learn_degree, problems, learn_opts.horizon,
                                             learn_opts.config(), learn_opts.train_runs);
      if (!learn_trace.empty()) write_text(learn_trace, trace_json(tp.optimization).dump(2) + "\n");
      const auto& power = std::get<mb::PowerIndex>(tp.policy.variant());
      json out = mb::to_json(power.theta);
      out["train_score"] = tp.optimization.best_score;
      write_text(learn_out, out.dump() + "\n");
    } else if (*enum_cmd) {
      stage = "enumerate-formulas";
      std::string out;
      if (enum_count_only) {
        json counts = json::object();
        for (std::size_t n = 1; n <= enum_len; ++n) counts[std::to_string(n)] = mb::formula_count(n);
        out = json{{"by_length", counts}, {"total", mb::formula_count_upto(enum_len)}}.dump() + "\n";
        write_text(enum_out, out);
      } else {
        std::ofstream file;
        std::ostream* os = &std::cout;
        if (!enum_out.empty() && enum_out != "-") {
          file.open(enum_out);
          if (!file) throw mb::ConfigError("cannot write '" + enum_out + "'");
          os = &file;
        }
        mb::enumerate_formulas(enum_len, [&](const mb::Formula& f) {
          *os << mb::to_prefix_string(f) << '\n';
        });
      }
    } else if (*cluster_cmd) {
      if (cluster_samples == 0) throw mb::ConfigError("--samples must be >= 1");
      stage = "cluster-formulas";
      const auto samples = mb::draw_samples(cluster_samples, cluster_seed);
      const auto start = std::chrono::steady_clock::now();
      const auto part = cluster_naive ? mb::partition_naive(cluster_len, samples)
                                      : mb::partition(cluster_len, samples);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::ofstream out(cluster_out);
      if (!out) throw mb::ConfigError("cannot write '" + cluster_out + "'");
      for (const auto& c : part.classes)
        out << json{{"expr", mb::to_prefix_string(c.representative)},
                    {"length", c.representative.length()},
                    {"class_size", c.class_size},
                    {"signature", c.signature.key.hex()}}
                   .dump()
            << '\n';
      std::cout << json{{"max_length", cluster_len},
                        {"samples", cluster_samples},
                        {"seed", cluster_seed},
                        {"formulas", part.total()},
                        {"invalid", part.invalid()},
                        {"classes", part.classes.size()},
                        {"seconds", secs}}
                       .dump()
                << std::endl;
    } else if (*search_cmd) {
      std::vector<mb::Formula> candidates;
      {
        std::ifstream in(search_in);
        if (!in) throw mb::ConfigError("cannot open '" + search_in + "'");
        std::string line;
        while (std::getline(in, line)) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          try {
            candidates.push_back(mb::parse_formula(json::parse(line).at("expr").get<std::string>()));
          } catch (const json::exception& e) {
            throw mb::ConfigError(search_in + ": " + e.what());
          }
        }
      }
      if (candidates.empty()) throw mb::ConfigError("no candidate formulas in '" + search_in + "'");
      if (search_cfg.budget < candidates.size())
        throw mb::ConfigError("budget " + std::to_string(search_cfg.budget) + " is below the " +
                              std::to_string(candidates.size()) + " candidates");
      const auto problems = search_src.load();
      stage = "search-formula";
      const auto ranked = search_round_robin
                              ? mb::search_round_robin(candidates, problems, search_cfg)
                              : mb::search_best(candidates, problems, search_cfg);
      std::string out;
      const std::size_t n = search_top ? std::min(search_top, ranked.size()) : ranked.size();
      for (std::size_t i = 0; i < n; ++i)
        out += jsonl_line({{"rank", i + 1},
                           {"expr", mb::to_prefix_string(ranked[i].formula)},
                           {"mean_reward", ranked[i].mean_reward},
                           {"reward_stddev", ranked[i].reward_stddev},
                           {"pulls", ranked[i].pulls},
                           {"horizon", search_cfg.horizon},
                           {"search_seed", search_cfg.seed},
                           {"train_problem_seed", search_src.seed},
                           {"train_problem_file", search_src.file}});
      write_text(search_out, out);
    } else if (*bench_cmd) {
      const auto spec = mb::experiment_from_json(read_json_file(bench_config));
      stage = "benchmark";
      const auto report = mb::run_experiment(spec);
      if (!bench_json.empty()) write_text(bench_json, mb::to_json(report).dump(2) + "\n");
      write_text(bench_csv, mb::to_csv(report));
      if (!report.complete) {
        std::cerr << "stage " << report.failed_stage << " failed: " << report.error << '\n';
        return kExitStage;
      }
    } else if (*report_cmd) {
      const auto report = mb::report_from_json(read_json_file(report_in));
      stage = "report";
      std::string out;
      if (report_format == "csv") {
        out = mb::to_csv(report);
      } else {
        out = "| policy | T | train T | mean regret | stderr | wins % |\n|---|---|---|---|---|---|\n";
        char buf[256];
        for (const auto& r : report.rows) {
          const std::string train = r.train_horizon ? std::to_string(*r.train_horizon) : "-";
          char wins[32] = "-";
          if (r.win_pct) std::snprintf(wins, sizeof wins, "%.1f", *r.win_pct);
          std::snprintf(buf, sizeof buf, "| %s | %zu | %s | %.2f | %.2f | %s |\n", r.policy.c_str(),
                        r.horizon, train.c_str(), r.mean_regret, r.stderr_regret, wins);
          out += buf;
        }
        if (!report.complete)
          out += "\nPartial report: stage " + report.failed_stage + " failed (" + report.error + ")\n";
      }
      write_text(report_out, out);
    }
  } catch (const mb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mb::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "stage " << stage << " failed: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
