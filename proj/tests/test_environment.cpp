#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "sensched/environment.hpp"
#include "sensched/policies.hpp"

namespace sensched {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Scenario golden_single(double p, double q) {
  return make_scenario({ProcessModel(scalar(1), scalar(1), scalar(1), scalar(1))}, {ChannelModel(p, q)});
}

/// N identical or generated processes with every channel set to (p, q).
Scenario with_channels(std::uint64_t seed, double p, double q) {
  Scenario g = scenario_generate(6, 3, seed);
  std::vector<ChannelModel> ch(3, ChannelModel(p, q));
  return make_scenario(g.processes, ch, seed);
}

TEST(ActionCount, Examples) {
  EXPECT_EQ(action_count(6, 3), 120u);
  EXPECT_EQ(action_count(9, 1), 9u);
  EXPECT_EQ(action_count(5, 2), oracle::ordered_tuples(5, 2).size());
  EXPECT_EQ(action_count(5, 2), 20u);
  EXPECT_THROW(action_count(2, 3), InvalidArgument);
  EXPECT_THROW(action_count(2, 0), InvalidArgument);
}

TEST(ActionCodec, FirstAndLast) {
  EXPECT_EQ(action_decode(0, 6, 3).assignment, (std::vector<std::size_t>{0, 1, 2}));
  const auto all = oracle::ordered_tuples(6, 3);
  EXPECT_EQ(action_decode(119, 6, 3).assignment, all.back());
  EXPECT_EQ(all.back(), (std::vector<std::size_t>{5, 4, 3}));
}

TEST(ActionCodec, MatchesLexicographicEnumeration) {
  for (auto [n, m] : {std::pair<std::size_t, std::size_t>{6, 3}, {5, 2}, {4, 4}, {7, 1}}) {
    const auto all = oracle::ordered_tuples(n, m);
    ASSERT_EQ(all.size(), action_count(n, m));
    for (std::uint64_t j = 0; j < all.size(); ++j) {
      const SchedAction a = action_decode(j, n, m);
      ASSERT_EQ(a.assignment, all[j]);
      ASSERT_EQ(action_encode(a, n, m), j);
    }
  }
}

TEST(ActionCodec, Errors) {
  EXPECT_THROW(action_decode(120, 6, 3), InvalidArgument);
  EXPECT_THROW(action_encode(SchedAction{{1, 1, 2}}, 6, 3), InvalidArgument);
  EXPECT_THROW(action_encode(SchedAction{{1, 2}}, 6, 3), InvalidArgument);
  EXPECT_THROW(action_encode(SchedAction{{1, 2, 6}}, 6, 3), InvalidArgument);
}

TEST(EnvReset, ZeroHoldingTimesAndGoodChannels) {
  const Scenario s = scenario_generate(6, 3, 5);
  const EnvState st = env_reset(s);
  EXPECT_EQ(st.tau, std::vector<std::uint64_t>(6, 0));
  EXPECT_EQ(st.gamma_prev, std::vector<std::uint8_t>(3, 1));
  EXPECT_EQ(st.step_index, 0u);
  const Vector obs = observation_build(st, s);
  ASSERT_EQ(obs.size(), 15);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(obs(i), 0.0);
    EXPECT_DOUBLE_EQ(obs(6 + i), h_apply(s.processes[i], s.caches[i].pbar()).trace());
  }
  EXPECT_EQ(obs.tail(3), Vector::Ones(3));
}

TEST(EnvReset, FirstRewardBound) {
  const Scenario s = scenario_generate(6, 3, 8);
  double bound = 0.0;
  for (std::size_t i = 0; i < 6; ++i) bound += h_apply(s.processes[i], s.caches[i].pbar()).trace();
  const CounterRng rng(4);
  for (std::uint64_t a = 0; a < 120; ++a) {
    const auto r = env_step(env_reset(s), action_decode(a, 6, 3), s, rng.fork(a));
    EXPECT_GE(r.reward, -bound - 1e-9);
  }
}

TEST(EnvStep, GuaranteedDelivery) {
  const Scenario s = with_channels(3, 0.0, 0.5);
  EnvState st = env_reset(s);
  st.tau = {4, 4, 4, 4, 4, 4};
  const auto r = env_step(st, SchedAction{{0, 1, 2}}, s, CounterRng(1));
  EXPECT_EQ(r.state.tau, (std::vector<std::uint64_t>{0, 0, 0, 5, 5, 5}));
  EXPECT_EQ(r.state.step_index, 1u);
}

TEST(EnvStep, NoDeliveryRewardStrictlyDecreases) {
  // One unstable process, channel stuck in the bad state.
  Matrix a(2, 2);
  a << 1.1, 0.0, 0.0, 0.5;
  Matrix c(1, 2);
  c << 1.0, 1.0;
  const Scenario s = make_scenario({ProcessModel(a, c, Matrix::Identity(2, 2), scalar(1)),
                                    ProcessModel(a, c, Matrix::Identity(2, 2), scalar(1))},
                                   {ChannelModel(0.5, 0.0)});
  EnvOptions opts;
  opts.initial_gamma = false;
  EnvState st = env_reset(s, opts);
  double prev = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto r = env_step(st, SchedAction{{static_cast<std::size_t>(k % 2)}}, s, CounterRng(k));
    EXPECT_EQ(r.state.tau, (std::vector<std::uint64_t>(2, k + 1)));
    if (k > 0) EXPECT_LT(r.reward, prev);
    prev = r.reward;
    st = r.state;
  }
}

TEST(EnvStep, TwoFailuresGoldenCase) {
  const Scenario s = golden_single(1.0, 0.0);  // fails next slot and stays failed
  EnvState st = env_reset(s);
  StepResult r{};
  for (int k = 0; k < 2; ++k) {
    r = env_step(st, SchedAction{{0}}, s, CounterRng(0));
    st = r.state;
  }
  const double expected = oracle::scalar_h_power(1, 1, oracle::scalar_riccati(1, 1, 1, 1, 1, 2000), 2);
  EXPECT_NEAR(r.reward, -expected, 1e-9);
  EXPECT_NEAR(r.reward, -2.618, 1e-3);
}

TEST(EnvStep, RejectsInvalidAction) {
  const Scenario s = scenario_generate(6, 3, 1);
  EXPECT_THROW(env_step(env_reset(s), SchedAction{{0, 0, 1}}, s, CounterRng(0)), InvalidArgument);
}

TEST(Observation, TraceBlockUsesNextPower) {
  const Scenario s = scenario_generate(6, 3, 2);
  EnvState st = env_reset(s);
  st.tau[4] = 2;
  const Vector obs = observation_build(st, s);
  const Matrix expected =
      oracle::h_power_loops(s.processes[4].A(), s.processes[4].W(), s.caches[4].pbar(), 3);
  EXPECT_NEAR(obs(6 + 4), expected.trace(), 1e-9 * expected.trace());
  EXPECT_EQ(obs(4), 2.0);

  EnvOptions scaled;
  scaled.scale_observation = true;
  const Vector obs_scaled = observation_build(env_reset(s), s, scaled);
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(obs_scaled(6 + i), 1.0);
}

// Random rollouts: holding-time dynamics, reward consistency, determinism.
TEST(EnvProperties, RandomRollouts) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scenario s = scenario_generate(6, 3, seed);
    const CounterRng env_rng(seed * 31 + 7);
    RandomStream pick(CounterRng(seed), 0);
    EnvState st = env_reset(s);
    std::vector<EnvState> trajectory;
    std::vector<std::uint64_t> actions;
    for (int k = 0; k < 2000; ++k) {
      const auto a = pick.below(120);
      actions.push_back(a);
      const SchedAction act = action_decode(a, 6, 3);
      const auto r = env_step(st, act, s, env_rng);
      std::set<std::size_t> delivered;
      for (std::size_t m = 0; m < 3; ++m)
        if (r.state.gamma_prev[m]) delivered.insert(act.assignment[m]);
      double cost = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        if (delivered.count(i)) ASSERT_EQ(r.state.tau[i], 0u);
        else ASSERT_EQ(r.state.tau[i], st.tau[i] + 1);
        cost += covariance_at_holding(s.caches[i], r.state.tau[i]).trace();
      }
      ASSERT_NEAR(r.reward, -cost, 1e-9 * cost);
      st = r.state;
      trajectory.push_back(st);
    }
    EnvState replay = env_reset(s);
    for (std::size_t k = 0; k < actions.size(); ++k) {
      replay = env_step(replay, action_decode(actions[k], 6, 3), s, env_rng).state;
      ASSERT_EQ(replay, trajectory[k]);
    }
  }
}

}  // namespace
}  // namespace sensched
