#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bicause/rng.hpp"
#include "bicause/stats.hpp"
#include "oracles.hpp"

using namespace bicause;

TEST(Asmd, HandEvaluatedExamples) {
  const std::vector<double> same{5, 5, 5};
  EXPECT_EQ(asmd(same, same), 0.0);
  const std::vector<double> t{1, 3}, c{0, 2};
  EXPECT_DOUBLE_EQ(asmd(t, c), 0.5);
  const std::vector<double> ones{1, 1}, zeros{0, 0};
  EXPECT_EQ(asmd(ones, zeros), kInfiniteAsmd);
}

TEST(Asmd, SingleObservationGroupsUseZeroVariance) {
  const std::vector<double> t{2.0}, c{0.0, 2.0};
  // variances 0 and 2
  EXPECT_DOUBLE_EQ(asmd(t, c), 1.0 / std::sqrt(2.0));
}

TEST(Asmd, RejectsEmptyGroup) {
  const std::vector<double> some{1.0}, none;
  EXPECT_THROW(asmd(some, none), InvalidArgument);
  EXPECT_THROW(asmd(none, some), InvalidArgument);
}

TEST(Asmd, AffineInvarianceAndSymmetry) {
  CounterRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto nt = 2 + rng.below(30), nc = 2 + rng.below(30);
    std::vector<double> t(nt), c(nc);
    for (auto& v : t) v = rng.normal(0.3, 1.0);
    for (auto& v : c) v = rng.normal(0.0, 2.0);
    const double base = asmd(t, c);
    EXPECT_NEAR(asmd(c, t), base, 1e-15);
    const double scale = rng.uniform() < 0.5 ? -(0.1 + 10 * rng.uniform()) : 0.1 + 10 * rng.uniform();
    const double shift = rng.normal(0.0, 100.0);
    auto map = [&](std::vector<double> v) {
      for (auto& x : v) x = scale * x + shift;
      return v;
    };
    EXPECT_NEAR(asmd(map(t), map(c)), base, 1e-9 * std::max(1.0, base));
  }
}

TEST(Fisher, WorkedExampleAndDegenerateTables) {
  EXPECT_NEAR(fisher_exact_p({3, 1, 1, 3}), 34.0 / 70.0, 1e-14);
  EXPECT_DOUBLE_EQ(fisher_exact_p({0, 0, 3, 5}), 1.0);
  EXPECT_NEAR(fisher_exact_p({4, 0, 0, 4}), 2.0 / 70.0, 1e-14);
}

TEST(Fisher, MatchesExhaustiveEnumerationForAllTablesUpTo40) {
  int checked = 0;
  double worst = 0.0;
  for (int n = 1; n <= 40; ++n)
    for (int a = 0; a <= n; ++a)
      for (int b = 0; a + b <= n; ++b)
        for (int c = 0; a + b + c <= n; ++c) {
          const int d = n - a - b - c;
          const double expected = oracle::fisher_enumerated(a, b, c, d);
          const double got = fisher_exact_p({a, b, c, d});
          worst = std::max(worst, std::abs(got - expected));
          ++checked;
        }
  EXPECT_LE(worst, 1e-10);
  EXPECT_EQ(checked, 135750);
}

TEST(Fisher, InvariantUnderRowAndColumnSwaps) {
  CounterRng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const Table2x2 t{static_cast<std::int64_t>(rng.below(15)), static_cast<std::int64_t>(rng.below(15)),
                     static_cast<std::int64_t>(rng.below(15)), static_cast<std::int64_t>(1 + rng.below(15))};
    const double p = fisher_exact_p(t);
    EXPECT_NEAR(fisher_exact_p({t.d, t.c, t.b, t.a}), p, 1e-12);  // both swaps
    EXPECT_NEAR(fisher_exact_p({t.c, t.d, t.a, t.b}), p, 1e-12);  // rows
    EXPECT_NEAR(fisher_exact_p({t.b, t.a, t.d, t.c}), p, 1e-12);  // columns
  }
}

TEST(ChiSquared, WorkedExample) {
  const Table2x2 t{10, 20, 20, 10};
  EXPECT_NEAR(chi2_statistic(t), 20.0 / 3.0, 1e-12);
  EXPECT_NEAR(chi2_p(t), std::erfc(std::sqrt(10.0 / 3.0)), 1e-14);
  EXPECT_NEAR(chi2_p(t), 0.00982, 5e-6);
  EXPECT_DOUBLE_EQ(chi2_p({10, 10, 10, 10}), 1.0);
}

TEST(ChiSquared, ZeroMarginIsAnError) { EXPECT_THROW(chi2_statistic({0, 0, 3, 4}), InvalidArgument); }

TEST(SplitTest, CochranDispatch) {
  EXPECT_FALSE(uses_chi2({3, 1, 1, 3}, SplitTest::automatic));
  EXPECT_TRUE(uses_chi2({50, 50, 50, 50}, SplitTest::automatic));
  EXPECT_DOUBLE_EQ(split_p_value({3, 1, 1, 3}), fisher_exact_p({3, 1, 1, 3}));
  EXPECT_DOUBLE_EQ(split_p_value({50, 50, 50, 50}), 1.0);
  EXPECT_TRUE(uses_chi2({3, 1, 1, 3}, SplitTest::chi2));
  EXPECT_FALSE(uses_chi2({50, 50, 50, 50}, SplitTest::fisher));
}

TEST(SplitTest, BranchesAgreeWhenExpectedCountsAreLarge) {
  CounterRng rng(8);
  int checked = 0;
  // the two tests converge as counts grow; at a few thousand per cell the
  // continuity gap is below 0.02
  while (checked < 100) {
    const Table2x2 t{2000 + static_cast<std::int64_t>(rng.below(2000)), 2000 + static_cast<std::int64_t>(rng.below(2000)),
                     2000 + static_cast<std::int64_t>(rng.below(2000)), 2000 + static_cast<std::int64_t>(rng.below(2000))};
    const double n = static_cast<double>(t.total());
    const double min_expected = std::min({t.row0() * t.col0(), t.row0() * t.col1(), t.row1() * t.col0(), t.row1() * t.col1()}) / n;
    if (min_expected < 20) continue;
    EXPECT_NEAR(chi2_p(t), fisher_exact_p(t), 0.02);
    ++checked;
  }
}

TEST(SplitTest, LogPValueSurvivesUnderflow) {
  const Table2x2 strong{9000, 1000, 1000, 9000};
  EXPECT_EQ(split_p_value(strong), 0.0);
  const double lp = split_log_p_value(strong);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_LT(lp, -1000.0);
  // stronger association has a smaller log p
  EXPECT_LT(split_log_p_value({9500, 500, 500, 9500}), lp);
}

TEST(Holm, WorkedExamples) {
  const std::vector<double> p{0.005, 0.01, 0.03, 0.04};
  const auto r = holm_bonferroni(p, 0.05);
  EXPECT_EQ(r.reject, (std::vector<bool>{true, true, false, false}));
  EXPECT_NEAR(r.adjusted_p[0], 0.02, 1e-15);
  EXPECT_NEAR(r.adjusted_p[1], 0.03, 1e-15);
  EXPECT_NEAR(r.adjusted_p[2], 0.06, 1e-15);
  EXPECT_NEAR(r.adjusted_p[3], 0.06, 1e-15);

  const std::vector<double> ones{1.0, 1.0};
  const auto r1 = holm_bonferroni(ones, 0.05);
  EXPECT_EQ(r1.reject, (std::vector<bool>{false, false}));
  EXPECT_EQ(r1.adjusted_p, (std::vector<double>{1.0, 1.0}));

  const std::vector<double> single{0.04};
  EXPECT_TRUE(holm_bonferroni(single, 0.05).reject[0]);
}

TEST(Holm, RejectsInvalidInput) {
  const std::vector<double> bad{0.1, 1.5};
  EXPECT_THROW(holm_bonferroni(bad, 0.05), InvalidArgument);
  const std::vector<double> ok{0.1};
  EXPECT_THROW(holm_bonferroni(ok, 0.0), InvalidArgument);
}

TEST(Holm, MatchesDefinitionOnRandomVectors) {
  CounterRng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = 1 + rng.below(20);
    std::vector<double> p(m);
    for (auto& v : p) {
      // mix of tiny, moderate, tied and large values
      const double u = rng.uniform();
      v = u < 0.3 ? 0.01 * rng.uniform() : (u < 0.4 ? 0.01 : rng.uniform());
    }
    const double alpha = trial % 2 ? 0.05 : 0.1;
    const auto got = holm_bonferroni(p, alpha);
    const auto want = oracle::holm_definition(p, alpha);
    ASSERT_EQ(got.reject, want.reject) << "trial " << trial;
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(got.adjusted_p[i], want.adjusted[i], 1e-15);

    for (std::size_t i = 0; i < m; ++i) {
      EXPECT_GE(got.adjusted_p[i], p[i]);
      EXPECT_EQ(got.reject[i], got.adjusted_p[i] <= alpha);
      if (p[i] <= alpha / static_cast<double>(m)) EXPECT_TRUE(got.reject[i]);  // Bonferroni subset
      if (got.reject[i]) EXPECT_LE(p[i], alpha);                             // uncorrected superset
    }
  }
}

TEST(Holm, LoweringOnePValueKeepsOtherRejections) {
  CounterRng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = 2 + rng.below(12);
    std::vector<double> p(m);
    for (auto& v : p) v = 0.05 * rng.uniform();
    const auto before = holm_bonferroni(p, 0.05);
    const auto k = rng.below(m);
    p[k] *= rng.uniform();
    const auto after = holm_bonferroni(p, 0.05);
    for (std::size_t i = 0; i < m; ++i)
      if (before.reject[i]) EXPECT_TRUE(after.reject[i]);
  }
}
