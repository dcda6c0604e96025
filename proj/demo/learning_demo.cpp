// Trains a desk-scale DQN on one scenario and compares it with the
// greedy-covariance baseline.
//
//   learning_demo [scenario-seed] [episodes]

#include <cstdlib>
#include <iostream>

#include "sensched/sensched.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  sensched::DqnConfig config;
  config.seed = seed;
  if (argc > 2) config.episodes = std::strtoull(argv[2], nullptr, 10);
  config.record_wall_time = true;

  const auto scenario = sensched::scenario_generate(6, 3, seed);
  const auto greedy = sensched::evaluate_policy(
      scenario, sensched::make_policy(sensched::PolicyKind::GreedyCovariance, scenario), "greedy-cov", 50000, 1);
  std::cout << "greedy-cov: " << greedy.empirical_avg_cost << "\n";

  const auto result = sensched::train(config, scenario);
  for (const auto& r : result.curve) {
    std::cout << "episode " << r.episode << " cost " << r.avg_cost << " eps " << r.epsilon << " t "
              << r.wall_seconds << "s\n";
  }
  if (result.aborted) {
    std::cout << "aborted: " << result.diagnostic << "\n";
    return 1;
  }
  const auto learned = sensched::evaluate_policy(
      scenario, sensched::greedy_policy_from(result.params, scenario, config.env_options()), "dqn", 50000, 1);
  std::cout << "dqn: " << learned.empirical_avg_cost << "\n";
}
