#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cmath>

#include "sensched/harness.hpp"

namespace sensched {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(Evaluate, PerfectChannelsHoldAtZero) {
  const ProcessModel p(scalar(1.1), scalar(1), scalar(1), scalar(1));
  const Scenario s = make_scenario({p, p}, {ChannelModel(0.0, 1.0), ChannelModel(0.0, 1.0)});
  const auto rep = evaluate_policy(s, make_policy(PolicyKind::Random, s), "random", 100, 3);
  const double expected = 2.0 * s.caches[0].trace_at(0);
  EXPECT_NEAR(rep.empirical_avg_cost, expected, 1e-12);
  EXPECT_EQ(rep.per_sensor_mean_trace.size(), 2u);
  EXPECT_FALSE(rep.overflow_step.has_value());
}

TEST(Evaluate, ReliableChannelCostIsPbarTrace) {
  const ProcessModel p(scalar(1), scalar(1), scalar(1), scalar(1));
  const Scenario s = make_scenario({p}, {ChannelModel(0.0, 0.4)});
  const auto rep = evaluate_policy(s, make_policy(PolicyKind::GreedyCovariance, s), "greedy-cov", 1000, 4);
  EXPECT_NEAR(rep.empirical_avg_cost, (std::sqrt(5.0) - 1.0) / 2.0, 1e-9);
}

TEST(Evaluate, DoublingStepsStaysWithinStandardErrors) {
  const Scenario s = scenario_generate(6, 3, 7);
  const auto pol = make_policy(PolicyKind::GreedyCovariance, s);
  const std::size_t half = 20000;
  // Batch-means standard error of the half run.
  const CounterRng root(3);
  const CounterRng ch = root.fork(0x4556414cull);
  RandomStream prng = make_stream(root, Stream::kPolicy);
  EnvState st = env_reset(s);
  std::vector<double> batch_means;
  double acc = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    const auto r = env_step(st, pol(st, prng), s, ch);
    st = r.state;
    acc -= r.reward;
    if ((k + 1) % 1000 == 0) {
      batch_means.push_back(acc / 1000.0);
      acc = 0.0;
    }
  }
  double mean = 0.0, var = 0.0;
  for (double b : batch_means) mean += b / static_cast<double>(batch_means.size());
  for (double b : batch_means) var += (b - mean) * (b - mean) / static_cast<double>(batch_means.size() - 1);
  const double se = std::sqrt(var / static_cast<double>(batch_means.size()));
  const double a = evaluate_policy(s, pol, "g", half, 3).empirical_avg_cost;
  const double b = evaluate_policy(s, pol, "g", 2 * half, 3).empirical_avg_cost;
  EXPECT_NEAR(a, mean, 1e-9 * mean);
  EXPECT_LT(std::abs(b - a), 3.0 * se);
}

TEST(Evaluate, PerSensorTracesSumToCost) {
  const Scenario s = scenario_generate(6, 3, 4);
  const auto rep = evaluate_policy(s, make_policy(PolicyKind::GreedyHolding, s), "greedy-tau", 2000, 2);
  double sum = 0.0;
  for (double v : rep.per_sensor_mean_trace) sum += v;
  EXPECT_NEAR(sum, rep.empirical_avg_cost, 1e-9 * rep.empirical_avg_cost);
}

TEST(Evaluate, SameSeedSameReport) {
  const Scenario s = scenario_generate(6, 3, 5);
  const auto pol = make_policy(PolicyKind::Random, s);
  const auto a = to_json(evaluate_policy(s, pol, "random", 3000, 8)).dump();
  const auto b = to_json(evaluate_policy(s, pol, "random", 3000, 8)).dump();
  const auto c = to_json(evaluate_policy(s, pol, "random", 3000, 9)).dump();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Evaluate, OverflowReportedAsNull) {
  const ProcessModel p(scalar(40.0), scalar(1), scalar(1), scalar(1));
  const Scenario s = make_scenario({p, p}, {ChannelModel(1.0, 0.0)});
  const auto rep = evaluate_policy(s, make_policy(PolicyKind::Random, s), "random", 2000, 1);
  ASSERT_TRUE(rep.overflow_step.has_value());
  const auto j = to_json(rep);
  EXPECT_TRUE(j["empirical_avg_cost"].is_null());
  EXPECT_EQ(j["overflow_step"].get<std::size_t>(), *rep.overflow_step);
}

TEST(Csv, CurveFormat) {
  std::vector<EpisodeRecord> curve{{0, 12.5, 0.5, 1e-4, 0.0}, {1, 0.1, 0.25, 5e-5, 1.5}};
  EXPECT_EQ(curve_to_csv(curve),
            "episode,avg_cost,epsilon,lr,wall_seconds\n"
            "0,12.5,0.5,0.0001,0\n"
            "1,0.10000000000000001,0.25,5.0000000000000002e-05,1.5\n");
}

TEST(Csv, ComparisonFormat) {
  std::vector<ComparisonRow> rows{{"random", 3.0, false, ""}, {"dqn", 0.0, true, "boom"}};
  EXPECT_EQ(comparison_to_csv(rows), "policy,avg_cost,status\nrandom,3,ok\ndqn,nan,failed\n");
}

TEST(Csv, ExportWritesFile) {
  const auto path = std::filesystem::temp_directory_path() / "sensched_curve_test.csv";
  export_curve_csv({{0, 1.0, 1.0, 1e-4, 0.0}}, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "episode,avg_cost,epsilon,lr,wall_seconds");
  std::filesystem::remove(path);
  EXPECT_THROW(write_text("/nonexistent-dir/x.csv", "x"), FormatError);
}

TEST(Compare, SmallRunProducesAllRows) {
  const Scenario s = scenario_generate(3, 2, 6);
  DqnConfig c;
  c.hidden_sizes = {8};
  c.episodes = 2;
  c.episode_length = 50;
  c.minibatch_size = 4;
  CompareOptions o;
  o.eval_steps = 500;
  const auto cmp = compare_all(s, c, o);
  ASSERT_EQ(cmp.rows.size(), 6u);
  EXPECT_EQ(cmp.rows[0].policy, "random");
  EXPECT_EQ(cmp.rows[3].policy, "greedy-cov");
  EXPECT_EQ(cmp.rows[4].policy, "dqn");
  EXPECT_EQ(cmp.rows[5].policy, "dqn-no-replay-no-target");
  for (const auto& r : cmp.rows) {
    EXPECT_FALSE(r.failed);
    EXPECT_GT(r.avg_cost, 0.0);
  }
  EXPECT_EQ(cmp.dqn.curve.size(), 2u);
  ASSERT_TRUE(cmp.ablation.has_value());
  o.include_ablation = false;
  EXPECT_EQ(compare_all(s, c, o).rows.size(), 5u);
}

}  // namespace
}  // namespace sensched
