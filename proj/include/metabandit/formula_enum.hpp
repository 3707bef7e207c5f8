#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "formula.hpp"

namespace metabandit {

/// Number of distinct trees of exactly `length` symbols (mirrored operands of
/// commutative operators count separately).
inline std::uint64_t formula_count(std::size_t length) {
  std::vector<std::uint64_t> a(length + 1, 0);
  for (std::size_t n = 1; n <= length; ++n) {
    if (n == 1) {
      a[n] = kLeafSymbols.size();
      continue;
    }
    a[n] = kUnarySymbols.size() * a[n - 1];
    for (std::size_t i = 1; i + 1 < n; ++i) a[n] += kBinarySymbols.size() * a[i] * a[n - 1 - i];
  }
  return length == 0 ? 0 : a[length];
}

inline std::uint64_t formula_count_upto(std::size_t max_length) {
  std::uint64_t total = 0;
  for (std::size_t n = 1; n <= max_length; ++n) total += formula_count(n);
  return total;
}

/// Enumeration layout within one length n >= 2: unary operators (grammar
/// order) over all length n-1 formulas, then binary operators (grammar
/// order), each over left lengths 1..n-2, left formula, right formula.
/// These helpers give the 0-based position of a formula within its length.
struct EnumerationLayout {
  static std::uint64_t binary_block(std::size_t n) {
    std::uint64_t s = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) s += formula_count(i) * formula_count(n - 1 - i);
    return s;
  }
  static std::uint64_t unary_position(std::size_t n, std::size_t op_index, std::uint64_t child_pos) {
    return op_index * formula_count(n - 1) + child_pos;
  }
  static std::uint64_t binary_position(std::size_t n, std::size_t op_index, std::size_t left_len,
                                       std::uint64_t left_pos, std::uint64_t right_pos) {
    std::uint64_t pos = kUnarySymbols.size() * formula_count(n - 1) + op_index * binary_block(n);
    for (std::size_t i = 1; i < left_len; ++i) pos += formula_count(i) * formula_count(n - 1 - i);
    return pos + left_pos * formula_count(n - 1 - left_len) + right_pos;
  }
};

/// Calls visit(const Formula&) for every formula of length <= max_length,
/// each exactly once, by nondecreasing length in EnumerationLayout order.
/// Keeps all formulas shorter than max_length in memory.
template <class Visitor>
void enumerate_formulas(std::size_t max_length, Visitor&& visit) {
  std::vector<std::vector<Formula>> by_length(max_length + 1);
  for (std::size_t n = 1; n <= max_length; ++n) {
    const bool keep = n < max_length;
    auto emit = [&](Formula f) {
      visit(static_cast<const Formula&>(f));
      if (keep) by_length[n].push_back(std::move(f));
    };
    if (n == 1) {
      for (Symbol s : kLeafSymbols) emit(Formula::leaf(s));
      continue;
    }
    for (Symbol u : kUnarySymbols)
      for (const Formula& child : by_length[n - 1]) emit(Formula::unary(u, child));
    for (Symbol b : kBinarySymbols)
      for (std::size_t i = 1; i + 1 < n; ++i)
        for (const Formula& lhs : by_length[i])
          for (const Formula& rhs : by_length[n - 1 - i]) emit(Formula::binary(b, lhs, rhs));
  }
}

inline std::vector<Formula> enumerate_formulas(std::size_t max_length) {
  std::vector<Formula> out;
  out.reserve(formula_count_upto(max_length));
  enumerate_formulas(max_length, [&out](const Formula& f) { out.push_back(f); });
  return out;
}

}  // namespace metabandit
