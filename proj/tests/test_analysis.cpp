#include <gtest/gtest.h>

#include <cmath>

#include "sensched/analysis.hpp"
#include "sensched/dqn.hpp"

namespace sensched {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

double binom(double n, double k) {
  double r = 1.0;
  for (int i = 1; i <= static_cast<int>(k); ++i) r = r * (n - k + i) / i;
  return r;
}

TEST(PlBound, SmallCaseByDirectProduct) {
  // (N-1) * C(L, N-1) * (1-q)^(L-2n) with N=3, L=10, n=1, q=0.5
  const double expected = 2.0 * binom(10, 2) * std::pow(0.5, 8);
  EXPECT_NEAR(pl_upper_bound(3, 10, 0.5, 1), expected, 1e-12 * expected);
}

TEST(PlBound, MatchesDirectFormulaOverGrid) {
  for (std::size_t n_s : {2u, 3u, 6u})
    for (std::size_t l : {15u, 40u, 80u})
      for (double q : {0.1, 0.5, 0.9}) {
        const double expected = static_cast<double>(n_s - 1) * binom(static_cast<double>(l), static_cast<double>(n_s - 1)) *
                                std::pow(1.0 - q, static_cast<double>(l) - 2.0);
        EXPECT_NEAR(pl_upper_bound(n_s, l, q, 1), expected, 1e-10 * expected);
      }
}

TEST(PlBound, RootApproachesOneMinusQ) {
  for (double q : {0.2, 0.5, 0.8}) {
    const double root = std::exp(log_pl_upper_bound(6, 500, q, 1) / 500.0);
    EXPECT_NEAR(root, 1.0 - q, 0.05);
  }
}

TEST(PlBound, LogMatchesDirectWhereRepresentable) {
  EXPECT_NEAR(log_pl_upper_bound(6, 100, 0.3, 1), std::log(pl_upper_bound(6, 100, 0.3, 1)), 1e-12);
  EXPECT_EQ(pl_upper_bound(6, 500, 0.8, 1), 0.0);  // underflows; the log does not
  EXPECT_TRUE(std::isfinite(log_pl_upper_bound(6, 500, 0.8, 1)));
}

TEST(PlBound, EdgeCasesAndErrors) {
  EXPECT_EQ(pl_upper_bound(1, 5, 0.5, 0), 0.0);
  EXPECT_EQ(pl_upper_bound(4, 20, 1.0, 1), 0.0);
  EXPECT_THROW(pl_upper_bound(6, 12, 0.5, 1), InvalidArgument);
  EXPECT_THROW(pl_upper_bound(6, 20, 0.5, 6), InvalidArgument);
  EXPECT_THROW(pl_upper_bound(6, 20, 0.0, 1), InvalidArgument);
}

TEST(BoundedTrend, ConstantAndGrowing) {
  EXPECT_TRUE(bounded_trend(std::vector<double>(100, 3.0)));
  std::vector<double> growing;
  for (int k = 1; k <= 100; ++k) growing.push_back(std::exp(0.1 * k));
  EXPECT_FALSE(bounded_trend(growing));
  std::vector<double> with_inf(10, 1.0);
  with_inf.back() = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(bounded_trend(with_inf));
  EXPECT_TRUE(bounded_trend({}));
}

TEST(StabilizingDemo, BoundedOnStableScenario) {
  const Scenario s = scenario_generate(4, 2, 17);
  ASSERT_TRUE(stability_check(s).satisfied);
  const auto res = stabilizing_policy_demo(s, 4, 20000, CounterRng(1));
  EXPECT_EQ(res.running_average.size(), 20000u);
  EXPECT_TRUE(std::isfinite(res.average_cost));
  EXPECT_TRUE(bounded_trend(res.running_average));
  EXPECT_GT(res.transmissions, 0u);
}

TEST(StabilizingDemo, UsesChannelWithLargestRecovery) {
  const ProcessModel p(scalar(0.9), scalar(1), scalar(1), scalar(1));
  const Scenario s = make_scenario({p, p, p}, {ChannelModel(0.2, 0.3), ChannelModel(0.2, 0.9), ChannelModel(0.2, 0.5)});
  EXPECT_EQ(stabilizing_policy_demo(s, 2, 10, CounterRng(2)).channel, 1u);
}

TEST(StabilizingDemo, HighThresholdTransmitsLess) {
  const Scenario s = scenario_generate(4, 2, 18);
  const auto lo = stabilizing_policy_demo(s, 4, 5000, CounterRng(3));
  const auto hi = stabilizing_policy_demo(s, 20, 5000, CounterRng(3));
  EXPECT_LT(hi.transmissions, lo.transmissions);
}

TEST(StabilizingDemo, PerfectChannelHasPeriodicHolding) {
  // Each sensor waits until its holding time reaches 6, then both go in consecutive slots.
  const ProcessModel p(scalar(1.2), scalar(1), scalar(1), scalar(1));
  const Scenario s = make_scenario({p, p}, {ChannelModel(0.0, 1.0)});
  const auto res = stabilizing_policy_demo(s, 5, 60, CounterRng(4));
  EXPECT_EQ(res.transmissions, 16u);
}

TEST(AbelTable, ConstantSequence) {
  const std::vector<double> costs(20000, 5.0);
  for (const auto& row : abel_table(costs, {0.5, 0.9, 0.99})) {
    EXPECT_NEAR(row.discounted, 5.0, 1e-9);
    EXPECT_DOUBLE_EQ(row.time_average, 5.0);
    EXPECT_FALSE(row.diverging);
  }
}

TEST(AbelTable, GapShrinksAsDiscountGrows) {
  std::vector<double> costs;
  for (int k = 0; k < 200000; ++k) costs.push_back(k % 7 == 0 ? 50.0 : 1.0 + 10.0 * std::exp(-0.01 * k));
  const auto rows = abel_table(costs, {0.9, 0.99, 0.999, 0.9999});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(std::abs(rows[i].discounted - rows[i].time_average),
              std::abs(rows[i - 1].discounted - rows[i - 1].time_average));
  }
}

TEST(AbelTable, DivergingMarker) {
  std::vector<double> costs;
  for (int k = 0; k < 1000; ++k) costs.push_back(std::pow(1.01, k));
  EXPECT_TRUE(abel_table(costs, {0.9})[0].diverging);
  costs.push_back(std::numeric_limits<double>::infinity());
  EXPECT_TRUE(abel_table(costs, {0.9})[0].diverging);
  EXPECT_THROW(abel_table(costs, {1.0}), InvalidArgument);
}

TEST(DiscountVsAverage, StablePolicyIsNotDiverging) {
  const Scenario s = scenario_generate(4, 2, 19);
  const auto rows = discount_vs_average(s, make_policy(PolicyKind::GreedyCovariance, s), {0.9, 0.99, 0.999}, 50000, 5);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.diverging);
    EXPECT_EQ(r.time_average, rows[0].time_average);
  }
  EXPECT_LT(std::abs(rows[2].discounted - rows[2].time_average), std::abs(rows[0].discounted - rows[0].time_average));
}

}  // namespace
}  // namespace sensched
