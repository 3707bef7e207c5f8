#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace metabandit {

// Grammar symbols. Order matters: it fixes enumeration order.
enum class Symbol : std::uint8_t {
  // variables
  RBar, SBar, Tk, T,
  // constants
  C1, C2, C3, C5, C7,
  // unary
  Sqrt, Ln, Abs, Neg, Inv,
  // binary
  Add, Sub, Mul, Div, Min, Max,
};

inline constexpr std::array<Symbol, 9> kLeafSymbols = {Symbol::RBar, Symbol::SBar, Symbol::Tk,
                                                       Symbol::T,    Symbol::C1,   Symbol::C2,
                                                       Symbol::C3,   Symbol::C5,   Symbol::C7};
inline constexpr std::array<Symbol, 5> kUnarySymbols = {Symbol::Sqrt, Symbol::Ln, Symbol::Abs,
                                                        Symbol::Neg, Symbol::Inv};
inline constexpr std::array<Symbol, 6> kBinarySymbols = {Symbol::Add, Symbol::Sub, Symbol::Mul,
                                                         Symbol::Div, Symbol::Min, Symbol::Max};

constexpr int arity(Symbol s) noexcept {
  if (s <= Symbol::C7) return 0;
  if (s <= Symbol::Inv) return 1;
  return 2;
}

constexpr bool is_variable(Symbol s) noexcept { return s <= Symbol::T; }

constexpr double constant_value(Symbol s) noexcept {
  switch (s) {
    case Symbol::C1: return 1.0;
    case Symbol::C2: return 2.0;
    case Symbol::C3: return 3.0;
    case Symbol::C5: return 5.0;
    case Symbol::C7: return 7.0;
    default: return 0.0;
  }
}

constexpr std::string_view symbol_name(Symbol s) noexcept {
  switch (s) {
    case Symbol::RBar: return "rbar";
    case Symbol::SBar: return "sbar";
    case Symbol::Tk: return "tk";
    case Symbol::T: return "t";
    case Symbol::C1: return "1";
    case Symbol::C2: return "2";
    case Symbol::C3: return "3";
    case Symbol::C5: return "5";
    case Symbol::C7: return "7";
    case Symbol::Sqrt: return "sqrt";
    case Symbol::Ln: return "ln";
    case Symbol::Abs: return "abs";
    case Symbol::Neg: return "neg";
    case Symbol::Inv: return "inv";
    case Symbol::Add: return "add";
    case Symbol::Sub: return "sub";
    case Symbol::Mul: return "mul";
    case Symbol::Div: return "div";
    case Symbol::Min: return "min";
    case Symbol::Max: return "max";
  }
  return "?";
}

inline double apply_unary(Symbol s, double x) noexcept {
  switch (s) {
    case Symbol::Sqrt: return std::sqrt(x);
    case Symbol::Ln: return std::log(x);
    case Symbol::Abs: return std::fabs(x);
    case Symbol::Neg: return -x;
    case Symbol::Inv: return 1.0 / x;
    default: return std::nan("");
  }
}

inline double apply_binary(Symbol s, double a, double b) noexcept {
  switch (s) {
    case Symbol::Add: return a + b;
    case Symbol::Sub: return a - b;
    case Symbol::Mul: return a * b;
    case Symbol::Div: return a / b;
    case Symbol::Min: return a < b ? a : b;
    case Symbol::Max: return a > b ? a : b;
    default: return std::nan("");
  }
}

/// The four quantities an index formula may read.
struct FormulaInputs {
  double rbar = 0.0;
  double sbar = 0.0;
  double tk = 1.0;
  double t = 1.0;
};

inline double variable_value(Symbol s, const FormulaInputs& in) noexcept {
  switch (s) {
    case Symbol::RBar: return in.rbar;
    case Symbol::SBar: return in.sbar;
    case Symbol::Tk: return in.tk;
    case Symbol::T: return in.t;
    default: return constant_value(s);
  }
}

/// An index formula stored as its prefix token sequence. The length of a
/// formula is its symbol count, i.e. `symbols().size()`.
class Formula {
 public:
  Formula() = default;
  explicit Formula(std::vector<Symbol> prefix) : prefix_(std::move(prefix)) {
    if (!well_formed(prefix_)) throw ConfigError("malformed prefix symbol sequence");
  }

  static bool well_formed(std::span<const Symbol> prefix) noexcept {
    // Each symbol consumes one open slot and opens arity() new ones.
    long open = 1;
    for (Symbol s : prefix) {
      if (open <= 0) return false;
      open += arity(s) - 1;
    }
    return open == 0;
  }

  std::size_t length() const noexcept { return prefix_.size(); }
  const std::vector<Symbol>& symbols() const noexcept { return prefix_; }
  bool empty() const noexcept { return prefix_.empty(); }

  static Formula leaf(Symbol s) { return Formula({s}); }
  static Formula unary(Symbol op, const Formula& child) {
    std::vector<Symbol> p;
    p.reserve(child.length() + 1);
    p.push_back(op);
    p.insert(p.end(), child.prefix_.begin(), child.prefix_.end());
    return Formula(std::move(p));
  }
  static Formula binary(Symbol op, const Formula& lhs, const Formula& rhs) {
    std::vector<Symbol> p;
    p.reserve(lhs.length() + rhs.length() + 1);
    p.push_back(op);
    p.insert(p.end(), lhs.prefix_.begin(), lhs.prefix_.end());
    p.insert(p.end(), rhs.prefix_.begin(), rhs.prefix_.end());
    return Formula(std::move(p));
  }

  friend bool operator==(const Formula&, const Formula&) = default;
  friend auto operator<=>(const Formula&, const Formula&) = default;

 private:
  std::vector<Symbol> prefix_;
};

/// Evaluates a prefix sequence right to left on a caller-provided stack.
/// Returns nullopt (INVALID) as soon as any node is NaN or infinite.
inline std::optional<double> eval_prefix(std::span<const Symbol> prefix, const FormulaInputs& in,
                                         std::vector<double>& stack) {
  stack.clear();
  for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) {
    const Symbol s = *it;
    double v;
    switch (arity(s)) {
      case 0:
        v = variable_value(s, in);
        break;
      case 1:
        v = apply_unary(s, stack.back());
        stack.pop_back();
        break;
      default: {
        const double lhs = stack.back();
        stack.pop_back();
        const double rhs = stack.back();
        stack.pop_back();
        v = apply_binary(s, lhs, rhs);
      }
    }
    if (!std::isfinite(v)) return std::nullopt;
    stack.push_back(v);
  }
  return stack.back();
}

inline std::optional<double> eval_formula(const Formula& f, const FormulaInputs& in) {
  std::vector<double> stack;
  stack.reserve(f.length());
  return eval_prefix(f.symbols(), in, stack);
}

// ---- text forms ----

namespace detail {
inline std::size_t write_prefix(std::span<const Symbol> p, std::size_t i, std::string& out) {
  const Symbol s = p[i];
  out += symbol_name(s);
  if (arity(s) == 0) return i + 1;
  out += '(';
  std::size_t next = write_prefix(p, i + 1, out);
  if (arity(s) == 2) {
    out += ',';
    next = write_prefix(p, next, out);
  }
  out += ')';
  return next;
}

inline int infix_precedence(Symbol s) {
  switch (s) {
    case Symbol::Add:
    case Symbol::Sub: return 1;
    case Symbol::Mul:
    case Symbol::Div: return 2;
    case Symbol::Neg: return 3;
    default: return 4;
  }
}

inline std::size_t write_infix(std::span<const Symbol> p, std::size_t i, std::string& out) {
  const Symbol s = p[i];
  auto sub = [&](std::size_t at, int min_prec, std::string& dst) {
    std::string tmp;
    const std::size_t next = write_infix(p, at, tmp);
    if (infix_precedence(p[at]) < min_prec)
      dst += "(" + tmp + ")";
    else
      dst += tmp;
    return next;
  };
  switch (s) {
    case Symbol::Add:
    case Symbol::Sub:
    case Symbol::Mul:
    case Symbol::Div: {
      const int prec = infix_precedence(s);
      std::size_t next = sub(i + 1, prec, out);
      out += s == Symbol::Add ? " + " : s == Symbol::Sub ? " - " : s == Symbol::Mul ? " * " : " / ";
      // Right operand of a non-associative op needs strictly higher precedence.
      const bool strict = s == Symbol::Sub || s == Symbol::Div;
      return sub(next, strict ? prec + 1 : prec, out);
    }
    case Symbol::Neg: {
      out += "-";
      return sub(i + 1, 3, out);
    }
    case Symbol::Inv: {
      out += "1/";
      return sub(i + 1, 4, out);
    }
    case Symbol::Min:
    case Symbol::Max: {
      out += symbol_name(s);
      out += "(";
      std::size_t next = write_infix(p, i + 1, out);
      out += ", ";
      next = write_infix(p, next, out);
      out += ")";
      return next;
    }
    case Symbol::Sqrt:
    case Symbol::Ln:
    case Symbol::Abs: {
      out += symbol_name(s);
      out += "(";
      const std::size_t next = write_infix(p, i + 1, out);
      out += ")";
      return next;
    }
    default:
      out += symbol_name(s);
      return i + 1;
  }
}
}  // namespace detail

/// Canonical prefix text, e.g. `add(rbar,div(2,tk))`. Round-trips through
/// parse_formula.
inline std::string to_prefix_string(const Formula& f) {
  std::string out;
  if (!f.empty()) detail::write_prefix(f.symbols(), 0, out);
  return out;
}

/// Human-oriented infix text, e.g. `rbar + 2 / tk`. Also parseable, though
/// `1/x` reads back as div(1,x) rather than inv(x).
inline std::string to_infix_string(const Formula& f) {
  std::string out;
  if (!f.empty()) detail::write_infix(f.symbols(), 0, out);
  return out;
}

namespace detail {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) {}

  Formula parse() {
    std::vector<Symbol> out;
    expr(out);
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return Formula(std::move(out));
  }

 private:
  // Each production appends a prefix sequence for its subtree.
  void expr(std::vector<Symbol>& out) {
    std::vector<Symbol> lhs;
    term(lhs);
    for (;;) {
      skip_ws();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        const Symbol op = text_[pos_] == '+' ? Symbol::Add : Symbol::Sub;
        ++pos_;
        std::vector<Symbol> rhs;
        term(rhs);
        lhs = combine(op, lhs, rhs);
      } else {
        break;
      }
    }
    out.insert(out.end(), lhs.begin(), lhs.end());
  }

  void term(std::vector<Symbol>& out) {
    std::vector<Symbol> lhs;
    unary(lhs);
    for (;;) {
      skip_ws();
      if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
        const Symbol op = text_[pos_] == '*' ? Symbol::Mul : Symbol::Div;
        ++pos_;
        std::vector<Symbol> rhs;
        unary(rhs);
        lhs = combine(op, lhs, rhs);
      } else {
        break;
      }
    }
    out.insert(out.end(), lhs.begin(), lhs.end());
  }

  void unary(std::vector<Symbol>& out) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      out.push_back(Symbol::Neg);
      unary(out);
      return;
    }
    primary(out);
  }

  void primary(std::vector<Symbol>& out) {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      expr(out);
      expect(')');
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t end = pos_;
      while (end < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.'))
        ++end;
      const std::string_view num = text_.substr(pos_, end - pos_);
      pos_ = end;
      if (num == "1") out.push_back(Symbol::C1);
      else if (num == "2") out.push_back(Symbol::C2);
      else if (num == "3") out.push_back(Symbol::C3);
      else if (num == "5") out.push_back(Symbol::C5);
      else if (num == "7") out.push_back(Symbol::C7);
      else fail("constant '" + std::string(num) + "' is not one of 1,2,3,5,7");
      return;
    }
    const std::string name = identifier();
    if (name.empty()) fail(std::string("unexpected character '") + c + "'");
    if (auto v = variable(name)) {
      out.push_back(*v);
      return;
    }
    const auto op = function(name);
    if (!op) fail("unknown identifier '" + name + "'");
    expect('(');
    out.push_back(*op);
    expr(out);
    if (arity(*op) == 2) {
      expect(',');
      expr(out);
    }
    expect(')');
  }

  static std::vector<Symbol> combine(Symbol op, const std::vector<Symbol>& a,
                                     const std::vector<Symbol>& b) {
    std::vector<Symbol> r;
    r.reserve(a.size() + b.size() + 1);
    r.push_back(op);
    r.insert(r.end(), a.begin(), a.end());
    r.insert(r.end(), b.begin(), b.end());
    return r;
  }

  std::string identifier() {
    skip_ws();
    std::size_t end = pos_;
    // Accept ASCII identifiers plus the UTF-8 bar/sigma spellings (r̄_k, σ̄_k).
    while (end < text_.size()) {
      const auto ch = static_cast<unsigned char>(text_[end]);
      if (std::isalnum(ch) || ch == '_' || ch >= 0x80)
        ++end;
      else
        break;
    }
    std::string id(text_.substr(pos_, end - pos_));
    pos_ = end;
    return id;
  }

  static std::optional<Symbol> variable(const std::string& n) {
    if (n == "rbar" || n == "r\xCC\x84" || n == "r\xCC\x84_k" || n == "rbar_k" || n == "r")
      return Symbol::RBar;
    if (n == "sbar" || n == "\xCF\x83\xCC\x84" || n == "\xCF\x83\xCC\x84_k" || n == "sbar_k" ||
        n == "sigma")
      return Symbol::SBar;
    if (n == "tk" || n == "t_k") return Symbol::Tk;
    if (n == "t") return Symbol::T;
    return std::nullopt;
  }

  static std::optional<Symbol> function(const std::string& n) {
    if (n == "add") return Symbol::Add;
    if (n == "sub") return Symbol::Sub;
    if (n == "mul") return Symbol::Mul;
    if (n == "div") return Symbol::Div;
    if (n == "min") return Symbol::Min;
    if (n == "max") return Symbol::Max;
    if (n == "sqrt") return Symbol::Sqrt;
    if (n == "ln" || n == "log") return Symbol::Ln;
    if (n == "abs") return Symbol::Abs;
    if (n == "neg" || n == "opposite") return Symbol::Neg;
    if (n == "inv" || n == "inverse") return Symbol::Inv;
    return std::nullopt;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("formula parse error at offset " + std::to_string(pos_) + ": " + msg +
                      " in \"" + std::string(text_) + "\"");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses either the canonical prefix form (`add(rbar,inv(tk))`) or infix
/// with + - * / and the grammar's function names (`rbar + 1/(tk + inv(2))`).
inline Formula parse_formula(std::string_view text) { return detail::FormulaParser(text).parse(); }

}  // namespace metabandit
