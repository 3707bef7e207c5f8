#include <metabandit/formula.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <string>

using namespace metabandit;

namespace {
FormulaInputs at(double rbar, double sbar, double tk, double t) { return {rbar, sbar, tk, t}; }
}  // namespace

TEST(Formula, Evaluation) {
  EXPECT_EQ(*eval_formula(parse_formula("rbar + 2/tk"), at(0.5, 0, 4, 10)), 1.0);
  for (double r : {0.0, 0.3, 1.0}) EXPECT_FALSE(eval_formula(parse_formula("ln(rbar - 2)"), at(r, 0, 1, 2)));
  const Formula zero = parse_formula("mul(sqrt(tk), sub(rbar, inv(2)))");
  for (double tk : {1.0, 7.0, 1e4}) EXPECT_EQ(*eval_formula(zero, at(0.5, 0.1, tk, 1e4)), 0.0);
  EXPECT_FALSE(eval_formula(parse_formula("inv(sbar)"), at(0.5, 0.0, 1, 2)));
  EXPECT_FALSE(eval_formula(parse_formula("sqrt(neg(t))"), at(0.5, 0.0, 1, 2)));
  EXPECT_FALSE(eval_formula(parse_formula("div(1, sub(t, t))"), at(0.5, 0.0, 1, 2)));
  EXPECT_EQ(*eval_formula(parse_formula("max(rbar, min(sbar, 7))"), at(0.2, 0.4, 1, 2)), 0.4);
  EXPECT_EQ(*eval_formula(parse_formula("abs(neg(5))"), at(0, 0, 1, 2)), 5.0);
  EXPECT_EQ(*eval_formula(parse_formula("sub(3, t)"), at(0, 0, 1, 2)), 1.0);
}

TEST(Formula, Lengths) {
  EXPECT_EQ(parse_formula("rbar + 2/tk").length(), 5u);
  EXPECT_EQ(parse_formula("rbar + sqrt(2 * ln(t) / tk)").length(), 9u);
  EXPECT_EQ(parse_formula("sqrt(tk) * (rbar - inv(2))").length(), 7u);
  EXPECT_EQ(parse_formula("1").length(), 1u);
}

TEST(Formula, PrefixRoundTrip) {
  for (const char* text : {"add(rbar,inv(tk))", "max(rbar,div(1,tk))", "neg(ln(abs(sbar)))",
                           "sub(min(t,7),mul(3,5))"}) {
    const Formula f = parse_formula(text);
    EXPECT_EQ(to_prefix_string(f), text);
    // Infix prints inv(x) as 1/x, which reads back as div(1,x).
    const Formula back = parse_formula(to_infix_string(f));
    const FormulaInputs in{0.3, 0.2, 4.0, 9.0};
    EXPECT_EQ(eval_formula(back, in), eval_formula(f, in)) << to_infix_string(f);
    if (std::string(text).find("inv") == std::string::npos) EXPECT_EQ(back, f) << to_infix_string(f);
  }
}

TEST(Formula, InfixPrecedenceAndUnicodeNames) {
  EXPECT_EQ(to_prefix_string(parse_formula("rbar - tk - t")), "sub(sub(rbar,tk),t)");
  EXPECT_EQ(to_prefix_string(parse_formula("rbar + tk * t")), "add(rbar,mul(tk,t))");
  EXPECT_EQ(to_prefix_string(parse_formula("-rbar")), "neg(rbar)");
  EXPECT_EQ(to_prefix_string(parse_formula("r\xCC\x84_k + 1/(t_k + 1/2)")),
            "add(rbar,div(1,add(tk,div(1,2))))");
  EXPECT_EQ(to_prefix_string(parse_formula("opposite(inverse(log(t)))")), "neg(inv(ln(t)))");
}

TEST(Formula, ParseErrors) {
  for (const char* bad : {"", "rbar +", "4", "0.5", "foo(rbar)", "add(rbar)", "rbar)", "sqrt rbar",
                          "min(rbar, tk, t)"})
    EXPECT_THROW(parse_formula(bad), ConfigError) << bad;
}

TEST(Formula, WellFormedPrefix) {
  EXPECT_TRUE(Formula::well_formed(std::vector<Symbol>{Symbol::Add, Symbol::RBar, Symbol::C1}));
  EXPECT_FALSE(Formula::well_formed(std::vector<Symbol>{Symbol::Add, Symbol::RBar}));
  EXPECT_FALSE(Formula::well_formed(std::vector<Symbol>{Symbol::RBar, Symbol::RBar}));
  EXPECT_FALSE(Formula::well_formed(std::vector<Symbol>{}));
  EXPECT_THROW(Formula(std::vector<Symbol>{Symbol::Sqrt}), ConfigError);
}
