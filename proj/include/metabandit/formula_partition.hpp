#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "formula.hpp"
#include "formula_enum.hpp"
#include "random.hpp"

namespace metabandit {

/// One random realization of (rbar, sbar, t_k, t) used to fingerprint formulas.
struct SamplePoint {
  double rbar = 0.0;
  double sbar = 0.0;
  std::uint32_t tk = 1;
  std::uint32_t t = 1;

  FormulaInputs inputs() const {
    return {rbar, sbar, static_cast<double>(tk), static_cast<double>(t)};
  }
};

/// rbar ~ U[0,1], sbar ~ U[0, sbar_max], t ~ U{t_min..t_max}, t_k ~ U{1..t}.
struct SampleDomain {
  double sbar_max = 0.5;
  std::uint32_t t_min = 2;
  std::uint32_t t_max = 10000;
};

inline std::vector<SamplePoint> draw_samples(std::size_t count, std::uint64_t seed,
                                             const SampleDomain& domain = {}) {
  if (domain.t_min < 1 || domain.t_max < domain.t_min)
    throw PreconditionError("sample domain needs 1 <= t_min <= t_max");
  Rng rng = make_rng(seed, {stream::kFormulaSamples});
  std::vector<SamplePoint> out(count);
  for (auto& p : out) {
    p.rbar = uniform01(rng);
    p.sbar = domain.sbar_max * uniform01(rng);
    p.t = std::uniform_int_distribution<std::uint32_t>(domain.t_min, domain.t_max)(rng);
    p.tk = std::uniform_int_distribution<std::uint32_t>(1, p.t)(rng);
  }
  return out;
}

inline constexpr double kRankTieTolerance = 1e-9;

/// Dense ranks (0 = smallest). Consecutive sorted values within the relative
/// tolerance share a rank.
inline void dense_ranks(std::span<const double> values, std::span<std::uint16_t> ranks,
                        std::vector<std::pair<double, std::uint32_t>>& scratch,
                        double tolerance = kRankTieTolerance) {
  scratch.resize(values.size());
  for (std::uint32_t i = 0; i < values.size(); ++i) scratch[i] = {values[i], i};
  std::sort(scratch.begin(), scratch.end());
  std::uint16_t rank = 0;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    if (i > 0) {
      const double a = scratch[i - 1].first;
      const double b = scratch[i].first;
      if (b - a > tolerance * std::max(std::fabs(a), std::fabs(b))) ++rank;
    }
    ranks[scratch[i].second] = rank;
  }
}

inline std::vector<std::uint16_t> dense_ranks(std::span<const double> values,
                                              double tolerance = kRankTieTolerance) {
  std::vector<std::uint16_t> r(values.size());
  std::vector<std::pair<double, std::uint32_t>> scratch;
  dense_ranks(values, r, scratch, tolerance);
  return r;
}

struct Hash128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  friend bool operator==(const Hash128&, const Hash128&) = default;

  std::string hex() const {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
  }
};

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const noexcept { return h.lo ^ (h.hi * 31); }
};

namespace detail {
template <class T>
Hash128 hash_words(std::span<const T> words) {
  std::uint64_t a = 0x243f6a8885a308d3ULL ^ words.size();
  std::uint64_t b = 0x13198a2e03707344ULL + words.size();
  for (const T w : words) {
    const auto x = static_cast<std::uint64_t>(w);
    a = mix64(a ^ x);
    b = mix64(b + (x ^ 0xa4093822299f31d0ULL));
  }
  return {a, b};
}

inline Hash128 hash_values(std::span<const double> values) {
  std::uint64_t a = 0x452821e638d01377ULL ^ values.size();
  std::uint64_t b = 0xbe5466cf34e90c6cULL + values.size();
  for (const double v : values) {
    const auto x = std::bit_cast<std::uint64_t>(v + 0.0);  // folds -0.0 into +0.0
    a = mix64(a ^ x);
    b = mix64(b + (x ^ 0xc0ac29b7c97c50ddULL));
  }
  return {a, b};
}
}  // namespace detail

/// 128-bit digest of a formula's dense-rank vector over the sample points.
struct Signature {
  Hash128 key;
  friend bool operator==(const Signature&, const Signature&) = default;
};

inline Signature signature_of_ranks(std::span<const std::uint16_t> ranks) {
  return {detail::hash_words(ranks)};
}

/// Values of `f` on every sample, or nullopt if any evaluation is INVALID.
inline std::optional<std::vector<double>> evaluate_on(const Formula& f,
                                                      std::span<const SamplePoint> samples) {
  std::vector<double> out(samples.size());
  std::vector<double> stack;
  stack.reserve(f.length());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = eval_prefix(f.symbols(), samples[i].inputs(), stack);
    if (!v) return std::nullopt;
    out[i] = *v;
  }
  return out;
}

inline std::optional<Signature> signature_of(const Formula& f, std::span<const SamplePoint> samples) {
  const auto values = evaluate_on(f, samples);
  if (!values) return std::nullopt;
  return signature_of_ranks(dense_ranks(*values));
}

struct FormulaClass {
  Formula representative;  // minimal length, earliest in enumeration order
  std::uint64_t class_size = 0;
  Signature signature;
};

struct PartitionResult {
  std::vector<FormulaClass> classes;  // ordered by (representative length, position)
  std::vector<std::uint64_t> total_by_length;    // index = length
  std::vector<std::uint64_t> invalid_by_length;  // index = length
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto v : total_by_length) s += v;
    return s;
  }
  std::uint64_t invalid() const {
    std::uint64_t s = 0;
    for (auto v : invalid_by_length) s += v;
    return s;
  }
};

namespace detail {

// Keyed by rank-vector digest; every bucket entry keeps its full rank vector
// so digest collisions are detected rather than silently merged.
class ClassTable {
 public:
  explicit ClassTable(std::size_t sample_count) : d_(sample_count) {}

  // Returns the class id for `ranks`, creating the class when new.
  std::uint32_t find_or_add(std::span<const std::uint16_t> ranks, const Signature& sig) {
    auto& bucket = index_[sig.key];
    for (std::uint32_t id : bucket)
      if (std::equal(ranks.begin(), ranks.end(), ranks_.begin() + std::ptrdiff_t(id) * d_))
        return id;
    const auto id = static_cast<std::uint32_t>(records_.size());
    if (!bucket.empty()) ++collisions_;
    bucket.push_back(id);
    ranks_.insert(ranks_.end(), ranks.begin(), ranks.end());
    records_.push_back({});
    records_.back().signature = sig;
    return id;
  }

  struct Record {
    Signature signature;
    std::uint64_t size = 0;
    std::size_t rep_length = std::numeric_limits<std::size_t>::max();
    std::uint64_t rep_pos = 0;
    Formula rep;
  };

  // Adds `count` members; `make_rep` is only called when (length, pos)
  // beats the current representative.
  template <class MakeRep>
  void add_members(std::uint32_t id, std::uint64_t count, std::size_t length, std::uint64_t pos,
                   MakeRep&& make_rep) {
    Record& r = records_[id];
    r.size += count;
    if (length < r.rep_length || (length == r.rep_length && pos < r.rep_pos)) {
      r.rep_length = length;
      r.rep_pos = pos;
      r.rep = make_rep();
    }
  }

  std::vector<Record>& records() { return records_; }
  std::size_t collisions() const { return collisions_; }

 private:
  std::size_t d_;
  std::unordered_map<Hash128, std::vector<std::uint32_t>, Hash128Hasher> index_;
  std::vector<std::uint16_t> ranks_;
  std::vector<Record> records_;
  std::size_t collisions_ = 0;
};

inline PartitionResult finish(ClassTable& table, std::size_t max_length,
                              std::vector<std::uint64_t> invalid) {
  PartitionResult out;
  out.total_by_length.assign(max_length + 1, 0);
  for (std::size_t n = 1; n <= max_length; ++n) out.total_by_length[n] = formula_count(n);
  out.invalid_by_length = std::move(invalid);
  auto& recs = table.records();
  std::vector<std::size_t> order(recs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (recs[a].rep_length != recs[b].rep_length) return recs[a].rep_length < recs[b].rep_length;
    return recs[a].rep_pos < recs[b].rep_pos;
  });
  out.classes.reserve(recs.size());
  for (std::size_t i : order)
    out.classes.push_back({std::move(recs[i].rep), recs[i].size, recs[i].signature});
  return out;
}

}  // namespace detail

/// Reference partition: evaluates every enumerated formula independently.
/// Exact but slow; intended for small max_length and as a cross-check.
inline PartitionResult partition_naive(std::size_t max_length, std::span<const SamplePoint> samples) {
  if (samples.size() > 65536) throw PreconditionError("at most 65536 sample points supported");
  detail::ClassTable table(samples.size());
  std::vector<std::uint64_t> invalid(max_length + 1, 0);
  std::vector<std::uint16_t> ranks(samples.size());
  std::vector<std::pair<double, std::uint32_t>> scratch;
  std::size_t current_len = 0;
  std::uint64_t pos = 0;
  enumerate_formulas(max_length, [&](const Formula& f) {
    if (f.length() != current_len) {
      current_len = f.length();
      pos = 0;
    }
    const auto values = evaluate_on(f, samples);
    if (!values) {
      ++invalid[f.length()];
    } else {
      dense_ranks(*values, ranks, scratch);
      const auto id = table.find_or_add(ranks, signature_of_ranks(ranks));
      table.add_members(id, 1, f.length(), pos, [&] { return f; });
    }
    ++pos;
  });
  return detail::finish(table, max_length, std::move(invalid));
}

struct PartitionStats {
  std::size_t value_groups = 0;   // distinct value vectors materialized
  std::size_t rank_evaluations = 0;
  std::size_t digest_collisions = 0;
};

/// Bottom-up partition. Formulas of one length with bit-identical value
/// vectors over the samples are grouped, and parents are built from groups
/// with multiplicities, so each distinct value vector is evaluated and
/// ranked once. Produces the same classes, sizes and representatives as
/// partition_naive.
inline PartitionResult partition(std::size_t max_length, std::span<const SamplePoint> samples,
                                 PartitionStats* stats = nullptr) {
  const std::size_t d = samples.size();
  if (d == 0) throw PreconditionError("partition needs at least one sample point");
  if (d > 65536) throw PreconditionError("at most 65536 sample points supported");
  if (max_length == 0) {
    detail::ClassTable empty(d);
    return detail::finish(empty, 0, {0});
  }

  struct Group {
    std::uint64_t multiplicity = 0;
    std::uint64_t first_pos = 0;
    Formula first;
    std::uint32_t cls = 0;
    // Only for groups of length max_length - 1: classes of unary(u, group)
    // (UINT32_MAX when invalid).
    std::array<std::uint32_t, kUnarySymbols.size()> unary_cls{};
  };
  struct Level {
    std::vector<Group> groups;
    std::vector<double> values;  // groups.size() * d, only for stored levels
    std::unordered_map<Hash128, std::vector<std::uint32_t>, Hash128Hasher> by_value;
  };

  detail::ClassTable table(d);
  PartitionStats local_stats;
  std::vector<Level> levels(max_length + 1);
  std::vector<std::uint64_t> valid(max_length + 1, 0);
  std::vector<double> vals(d);
  std::vector<double> uvals(d);
  std::vector<std::uint16_t> ranks(d);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  constexpr std::uint32_t kNoClass = std::numeric_limits<std::uint32_t>::max();

  auto all_finite = [d](const std::vector<double>& v) {
    bool ok = true;
    for (std::size_t i = 0; i < d; ++i) ok &= (v[i] - v[i]) == 0.0;
    return ok;
  };
  auto class_of = [&](const std::vector<double>& v) {
    dense_ranks(v, ranks, scratch);
    ++local_stats.rank_evaluations;
    return table.find_or_add(ranks, signature_of_ranks(ranks));
  };

  // Handles one group-level combination of length n whose values are in
  // `vals`. `pos` is the enumeration position of its first member.
  auto consume = [&](std::size_t n, std::uint64_t mult, std::uint64_t pos, auto&& make_formula) {
    if (!all_finite(vals)) return;
    valid[n] += mult;
    const bool stored = n + 1 < max_length;  // children of binary parents
    const bool streamed = n + 1 == max_length;  // children of unary parents only
    if (!stored && !streamed) {
      const auto id = class_of(vals);
      table.add_members(id, mult, n, pos, make_formula);
      return;
    }
    Level& lvl = levels[n];
    const Hash128 vh = detail::hash_values(vals);
    auto& bucket = lvl.by_value[vh];
    if (stored) {
      for (std::uint32_t g : bucket) {
        if (std::equal(vals.begin(), vals.end(), lvl.values.begin() + std::ptrdiff_t(g) * d)) {
          lvl.groups[g].multiplicity += mult;
          table.add_members(lvl.groups[g].cls, mult, n, pos, make_formula);
          return;
        }
      }
    } else if (!bucket.empty()) {
      // Streamed level: the 128-bit value digest stands in for the vector.
      Group& grp = lvl.groups[bucket.front()];
      grp.multiplicity += mult;
      table.add_members(grp.cls, mult, n, pos, make_formula);
      return;
    }
    Group grp;
    grp.multiplicity = mult;
    grp.first_pos = pos;
    grp.first = make_formula();
    grp.cls = class_of(vals);
    table.add_members(grp.cls, mult, n, pos, [&] { return grp.first; });
    if (streamed) {
      for (std::size_t u = 0; u < kUnarySymbols.size(); ++u) {
        const Symbol op = kUnarySymbols[u];
        for (std::size_t i = 0; i < d; ++i) uvals[i] = apply_unary(op, vals[i]);
        grp.unary_cls[u] = all_finite(uvals) ? class_of(uvals) : kNoClass;
      }
    }
    bucket.push_back(static_cast<std::uint32_t>(lvl.groups.size()));
    if (stored) lvl.values.insert(lvl.values.end(), vals.begin(), vals.end());
    lvl.groups.push_back(std::move(grp));
    ++local_stats.value_groups;
  };

  for (std::size_t n = 1; n <= max_length; ++n) {
    if (n == 1) {
      for (std::size_t s = 0; s < kLeafSymbols.size(); ++s) {
        const Symbol leaf = kLeafSymbols[s];
        for (std::size_t i = 0; i < d; ++i) vals[i] = variable_value(leaf, samples[i].inputs());
        consume(1, 1, s, [leaf] { return Formula::leaf(leaf); });
      }
    } else if (n == max_length) {
      // Unary parents of the streamed level were classified as its groups
      // appeared; only multiplicities remain to be credited.
      for (std::size_t u = 0; u < kUnarySymbols.size(); ++u) {
        for (const Group& g : levels[n - 1].groups) {
          if (g.unary_cls[u] == kNoClass) continue;
          valid[n] += g.multiplicity;
          const Symbol op = kUnarySymbols[u];
          table.add_members(g.unary_cls[u], g.multiplicity, n,
                            EnumerationLayout::unary_position(n, u, g.first_pos),
                            [&] { return Formula::unary(op, g.first); });
        }
      }
    } else {
      const Level& child = levels[n - 1];
      for (std::size_t u = 0; u < kUnarySymbols.size(); ++u) {
        const Symbol op = kUnarySymbols[u];
        for (std::size_t g = 0; g < child.groups.size(); ++g) {
          const double* cv = child.values.data() + g * d;
          for (std::size_t i = 0; i < d; ++i) vals[i] = apply_unary(op, cv[i]);
          const Group& cg = child.groups[g];
          consume(n, cg.multiplicity, EnumerationLayout::unary_position(n, u, cg.first_pos),
                  [&] { return Formula::unary(op, cg.first); });
        }
      }
    }
    for (std::size_t b = 0; b < kBinarySymbols.size(); ++b) {
      const Symbol op = kBinarySymbols[b];
      for (std::size_t li = 1; li + 1 < n; ++li) {
        const Level& left = levels[li];
        const Level& right = levels[n - 1 - li];
        for (std::size_t gl = 0; gl < left.groups.size(); ++gl) {
          const double* lv = left.values.data() + gl * d;
          const Group& lg = left.groups[gl];
          for (std::size_t gr = 0; gr < right.groups.size(); ++gr) {
            const double* rv = right.values.data() + gr * d;
            const Group& rg = right.groups[gr];
            switch (op) {
              case Symbol::Add: for (std::size_t i = 0; i < d; ++i) vals[i] = lv[i] + rv[i]; break;
              case Symbol::Sub: for (std::size_t i = 0; i < d; ++i) vals[i] = lv[i] - rv[i]; break;
              case Symbol::Mul: for (std::size_t i = 0; i < d; ++i) vals[i] = lv[i] * rv[i]; break;
              case Symbol::Div: for (std::size_t i = 0; i < d; ++i) vals[i] = lv[i] / rv[i]; break;
              default:
                for (std::size_t i = 0; i < d; ++i) vals[i] = apply_binary(op, lv[i], rv[i]);
            }
            consume(n, lg.multiplicity * rg.multiplicity,
                    EnumerationLayout::binary_position(n, b, li, lg.first_pos, rg.first_pos),
                    [&] { return Formula::binary(op, lg.first, rg.first); });
          }
        }
      }
    }
  }

  std::vector<std::uint64_t> invalid(max_length + 1, 0);
  for (std::size_t n = 1; n <= max_length; ++n) invalid[n] = formula_count(n) - valid[n];
  local_stats.digest_collisions = table.collisions();
  if (stats) *stats = local_stats;
  return detail::finish(table, max_length, std::move(invalid));
}

}  // namespace metabandit
