#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "formula.hpp"
#include "policies.hpp"
#include "power.hpp"

namespace metabandit {

namespace detail {

inline double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("parameter '" + std::string(key) + "' is not a number: '" +
                      std::string(text) + "'");
  return v;
}

// "a=1,b=2" -> {a:1, b:2}
inline std::map<std::string, std::string> parse_kv(std::string_view text) {
  std::map<std::string, std::string> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("expected key=value, got '" + std::string(item) + "'");
    out.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

inline double take(std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const double v = parse_double(key, it->second);
  kv.erase(it);
  return v;
}

inline void reject_leftovers(const std::map<std::string, std::string>& kv, std::string_view kind) {
  if (!kv.empty())
    throw ConfigError("unknown parameter '" + kv.begin()->first + "' for policy '" +
                      std::string(kind) + "'");
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline ThetaVector load_theta_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open theta file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("theta file '" + path.string() + "': " + e.what());
  }
  return theta_from_json(j);
}

/// Parses `ucb1:C=2`, `ucb1tuned`, `ucb1normal`, `ucbv:zeta=1,c=1`,
/// `klucb:c=0`, `ucb2:alpha=0.001`, `epsgreedy:c=1,d=1`, `formula:<expr>`,
/// `power:P=1,theta=@file.json` (missing theta means all zeros).
/// Omitted parameters take the literature defaults.
inline Policy parse_policy(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string kind(spec.substr(0, colon));
  const std::string_view rest = colon == std::string_view::npos ? "" : spec.substr(colon + 1);
  if (kind == "formula") {
    if (rest.empty()) throw ConfigError("formula policy needs an expression");
    return Policy::formula(parse_formula(rest));
  }
  auto kv = detail::parse_kv(rest);
  Policy p;
  if (kind == "ucb1") {
    p = Policy::ucb1(detail::take(kv, "C", 2.0));
  } else if (kind == "ucb1tuned") {
    p = Policy::ucb1_tuned(detail::take(kv, "variance", 0.0) != 0.0);
  } else if (kind == "ucb1normal") {
    p = Policy::ucb1_normal();
  } else if (kind == "ucbv") {
    const double zeta = detail::take(kv, "zeta", 1.0);
    p = Policy::ucbv(zeta, detail::take(kv, "c", 1.0));
  } else if (kind == "klucb") {
    p = Policy::klucb(detail::take(kv, "c", 0.0));
  } else if (kind == "ucb2") {
    p = Policy::ucb2(detail::take(kv, "alpha", 0.001));
  } else if (kind == "epsgreedy") {
    const double c = detail::take(kv, "c", 1.0);
    p = Policy::eps_greedy(c, detail::take(kv, "d", 1.0));
  } else if (kind == "power") {
    const auto degree = static_cast<std::size_t>(detail::take(kv, "P", 1.0));
    ThetaVector theta = ThetaVector::zeros(degree);
    if (auto it = kv.find("theta"); it != kv.end()) {
      std::string_view ref = it->second;
      if (ref.empty() || ref.front() != '@')
        throw ConfigError("power theta must be given as theta=@path");
      theta = load_theta_file(std::string(ref.substr(1)));
      if (theta.degree() != degree)
        throw ConfigError("theta file degree does not match P=" + std::to_string(degree));
      kv.erase(it);
    }
    p = Policy::power(std::move(theta));
  } else {
    throw ConfigError("unknown policy kind '" + kind + "'");
  }
  detail::reject_leftovers(kv, kind);
  return p;
}

/// Round-trippable text for every policy except Power-P, whose theta is
/// summarized by its degree.
inline std::string describe(const Policy& policy) {
  using detail::format_number;
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Ucb1>)
          return "ucb1:C=" + format_number(p.c);
        else if constexpr (std::is_same_v<P, Ucb1Tuned>)
          return p.variance_form ? "ucb1tuned:variance=1" : "ucb1tuned";
        else if constexpr (std::is_same_v<P, Ucb1Normal>)
          return "ucb1normal";
        else if constexpr (std::is_same_v<P, Ucb2>)
          return "ucb2:alpha=" + format_number(p.alpha);
        else if constexpr (std::is_same_v<P, UcbV>)
          return "ucbv:zeta=" + format_number(p.zeta) + ",c=" + format_number(p.c);
        else if constexpr (std::is_same_v<P, KlUcb>)
          return "klucb:c=" + format_number(p.c);
        else if constexpr (std::is_same_v<P, EpsGreedy>)
          return "epsgreedy:c=" + format_number(p.c) + ",d=" + format_number(p.d);
        else if constexpr (std::is_same_v<P, FormulaIndex>)
          return "formula:" + to_prefix_string(p.formula);
        else
          return "power:P=" + std::to_string(p.theta.degree());
      },
      policy.variant());
}

// ---- tunable parameter vectors (EDA search space) ----

/// Current numeric parameters in a fixed order: ucb1 [C], ucbv [zeta, c],
/// klucb [c], ucb2 [alpha], epsgreedy [c, d], power [theta...]. Empty for
/// parameter-free policies.
inline std::vector<double> tunable_parameters(const Policy& policy) {
  return std::visit(
      [](const auto& p) -> std::vector<double> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Ucb1>)
          return {p.c};
        else if constexpr (std::is_same_v<P, UcbV>)
          return {p.zeta, p.c};
        else if constexpr (std::is_same_v<P, KlUcb>)
          return {p.c};
        else if constexpr (std::is_same_v<P, Ucb2>)
          return {p.alpha};
        else if constexpr (std::is_same_v<P, EpsGreedy>)
          return {p.c, p.d};
        else if constexpr (std::is_same_v<P, PowerIndex>)
          return {p.theta.values().begin(), p.theta.values().end()};
        else
          return {};
      },
      policy.variant());
}

/// Copy of `policy` with its tunable parameters replaced by `params`.
inline Policy with_parameters(const Policy& policy, std::span<const double> params) {
  Policy out = policy;
  const auto expect = tunable_parameters(policy).size();
  if (params.size() != expect)
    throw PreconditionError("with_parameters: expected " + std::to_string(expect) +
                            " parameters, got " + std::to_string(params.size()));
  std::visit(
      [&params](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Ucb1>) {
          p.c = params[0];
        } else if constexpr (std::is_same_v<P, UcbV>) {
          p.zeta = params[0];
          p.c = params[1];
        } else if constexpr (std::is_same_v<P, KlUcb>) {
          p.c = params[0];
        } else if constexpr (std::is_same_v<P, Ucb2>) {
          p.alpha = params[0];
        } else if constexpr (std::is_same_v<P, EpsGreedy>) {
          p.c = params[0];
          p.d = params[1];
        } else if constexpr (std::is_same_v<P, PowerIndex>) {
          std::copy(params.begin(), params.end(), p.theta.values().begin());
        }
      },
      out.variant());
  return out;
}

}  // namespace metabandit
