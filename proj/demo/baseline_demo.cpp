// Generates one scenario and prints the long-run cost of each baseline.

#include <cstdlib>
#include <iostream>

#include "sensched/sensched.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const auto scenario = sensched::scenario_generate(6, 3, seed);
  std::cout << sensched::stability_check(scenario);
  for (auto kind : {sensched::PolicyKind::Random, sensched::PolicyKind::RoundRobin,
                    sensched::PolicyKind::GreedyHolding, sensched::PolicyKind::GreedyCovariance}) {
    const auto name = std::string(sensched::policy_name(kind));
    const auto rep = sensched::evaluate_policy(scenario, sensched::make_policy(kind, scenario), name, 50000, 1);
    std::cout << name << ": " << rep.empirical_avg_cost << "\n";
  }
}
