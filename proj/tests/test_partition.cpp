#include <metabandit/formula_partition.hpp>

#include <gtest/gtest.h>

#include <map>

using namespace metabandit;

namespace {

const std::vector<SamplePoint>& samples() {
  static const auto s = draw_samples(1024, 2024);
  return s;
}

Signature sig(const char* text) {
  const auto s = signature_of(parse_formula(text), samples());
  EXPECT_TRUE(s.has_value()) << text;
  return s.value_or(Signature{});
}

}  // namespace

TEST(Samples, Domains) {
  for (const auto& p : draw_samples(5000, 1)) {
    ASSERT_GE(p.rbar, 0.0);
    ASSERT_LE(p.rbar, 1.0);
    ASSERT_GE(p.sbar, 0.0);
    ASSERT_LE(p.sbar, 0.5);
    ASSERT_GE(p.t, 2u);
    ASSERT_LE(p.t, 10000u);
    ASSERT_GE(p.tk, 1u);
    ASSERT_LE(p.tk, p.t);
  }
  EXPECT_EQ(draw_samples(10, 3)[7].t, draw_samples(10, 3)[7].t);
}

TEST(DenseRanks, TieToleranceAndOrder) {
  const std::vector<double> v{0.3, 0.1, 0.3 * (1 + 1e-12), 0.2, 0.1};
  EXPECT_EQ(dense_ranks(v), (std::vector<std::uint16_t>{2, 0, 2, 1, 0}));
  const std::vector<double> w{1.0, 1.0 + 1e-6};
  EXPECT_EQ(dense_ranks(w), (std::vector<std::uint16_t>{0, 1}));
}

TEST(Signature, Examples) {
  EXPECT_EQ(sig("1").key, sig("7").key);
  EXPECT_EQ(sig("rbar").key, sig("rbar * 2").key);
  EXPECT_EQ(sig("rbar").key, sig("sqrt(rbar)").key);
  EXPECT_EQ(sig("2 * rbar").key, sig("rbar + rbar").key);
  EXPECT_NE(sig("rbar").key, sig("neg(rbar)").key);
  EXPECT_EQ(sig("tk").key, sig("ln(tk)").key);
  EXPECT_EQ(sig("tk").key, sig("sqrt(tk)").key);
  EXPECT_NE(sig("tk").key, sig("t").key);
  EXPECT_FALSE(signature_of(parse_formula("ln(rbar - 2)"), samples()));
}

TEST(Partition, FastMatchesNaive) {
  for (std::size_t L = 1; L <= 4; ++L) {
    const auto a = partition_naive(L, samples());
    PartitionStats st;
    const auto b = partition(L, samples(), &st);
    ASSERT_EQ(a.classes.size(), b.classes.size()) << L;
    EXPECT_EQ(a.invalid_by_length, b.invalid_by_length);
    EXPECT_EQ(a.total_by_length, b.total_by_length);
    for (std::size_t i = 0; i < a.classes.size(); ++i) {
      EXPECT_EQ(a.classes[i].representative, b.classes[i].representative);
      EXPECT_EQ(a.classes[i].class_size, b.classes[i].class_size);
      EXPECT_EQ(a.classes[i].signature.key, b.classes[i].signature.key);
    }
    EXPECT_EQ(st.digest_collisions, 0u);
  }
}

TEST(Partition, FastMatchesNaiveAtFiveOnFewSamples) {
  const auto few = draw_samples(64, 5);
  const auto a = partition_naive(5, few);
  const auto b = partition(5, few);
  ASSERT_EQ(a.classes.size(), b.classes.size());
  EXPECT_EQ(a.invalid(), b.invalid());
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    EXPECT_EQ(a.classes[i].representative, b.classes[i].representative);
    EXPECT_EQ(a.classes[i].class_size, b.classes[i].class_size);
  }
}

TEST(Partition, ClassesAreConsistent) {
  const auto r = partition(3, samples());
  EXPECT_EQ(r.total(), 9u + 45u + 711u);
  std::uint64_t members = 0;
  std::map<std::string, std::size_t> rep_class;
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    members += r.classes[i].class_size;
    rep_class[to_prefix_string(r.classes[i].representative)] = i;
  }
  EXPECT_EQ(members + r.invalid(), r.total());

  // Every valid formula's class representative is no longer than it; invalid
  // ones never appear.
  std::map<std::string, std::size_t> sig_to_class;
  for (std::size_t i = 0; i < r.classes.size(); ++i) sig_to_class[r.classes[i].signature.key.hex()] = i;
  for (const auto& f : enumerate_formulas(3)) {
    const auto s = signature_of(f, samples());
    if (!s) {
      EXPECT_FALSE(rep_class.count(to_prefix_string(f)));
      continue;
    }
    const auto& cls = r.classes.at(sig_to_class.at(s->key.hex()));
    EXPECT_LE(cls.representative.length(), f.length());
  }

  EXPECT_TRUE(rep_class.count("rbar"));
  EXPECT_TRUE(rep_class.count("1"));
  EXPECT_FALSE(rep_class.count("7"));  // merged into the constant class
  EXPECT_EQ(r.classes[rep_class.at("1")].signature.key, sig("ln(7)").key);

  // Separated representatives differ in rank order on some sample point.
  std::vector<std::vector<std::uint16_t>> ranks;
  for (const auto& c : r.classes) ranks.push_back(dense_ranks(*evaluate_on(c.representative, samples())));
  for (std::size_t i = 0; i < ranks.size(); ++i)
    for (std::size_t j = i + 1; j < ranks.size(); ++j) EXPECT_NE(ranks[i], ranks[j]);
}

TEST(Partition, Deterministic) {
  const auto a = partition(4, samples());
  const auto b = partition(4, samples());
  ASSERT_EQ(a.classes.size(), b.classes.size());
  for (std::size_t i = 0; i < a.classes.size(); ++i)
    EXPECT_EQ(a.classes[i].signature.key, b.classes[i].signature.key);
}
