#pragma once

// Baseline schedulers. Each chooses a set of M sensors and then assigns the
// set to channels in a uniformly random order.

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sensched/environment.hpp"

namespace sensched {

enum class PolicyKind { Random, RoundRobin, GreedyHolding, GreedyCovariance };

inline std::string_view policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Random: return "random";
    case PolicyKind::RoundRobin: return "roundrobin";
    case PolicyKind::GreedyHolding: return "greedy-tau";
    case PolicyKind::GreedyCovariance: return "greedy-cov";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::GreedyHolding,
                 PolicyKind::GreedyCovariance}) {
    if (policy_name(k) == name) return k;
  }
  return std::nullopt;
}

/// A policy maps the MDP state to an action; the stream supplies any randomness.
using Policy = std::function<SchedAction(const EnvState&, RandomStream&)>;

/// In-place Fisher-Yates driven by RandomStream (vendor-independent).
template <typename T>
void shuffle(std::vector<T>& v, RandomStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

inline SchedAction assign_randomly(std::vector<std::size_t> chosen, RandomStream& rng) {
  shuffle(chosen, rng);
  return SchedAction{std::move(chosen)};
}

/// Uniform ordered M-tuple: partial Fisher-Yates over all sensors.
inline SchedAction policy_random(std::size_t n, std::size_t m, RandomStream& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(pool[i], pool[i + rng.below(n - i)]);
  }
  pool.resize(m);
  return SchedAction{std::move(pool)};
}

/// Window of M consecutive sensors advancing by M each step (mod N).
inline SchedAction policy_round_robin(std::size_t n, std::size_t m, std::uint64_t step, RandomStream& rng) {
  std::vector<std::size_t> chosen(m);
  const std::uint64_t start = (step % n) * (m % n) % n;
  for (std::size_t j = 0; j < m; ++j) chosen[j] = static_cast<std::size_t>((start + j) % n);
  return assign_randomly(std::move(chosen), rng);
}

/// Indices of the m largest scores; ties go to the smaller index.
template <typename Score>
std::vector<std::size_t> top_m(std::size_t n, std::size_t m, Score score) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
  idx.resize(m);
  return idx;
}

inline SchedAction policy_greedy_holding(const EnvState& st, std::size_t m, RandomStream& rng) {
  return assign_randomly(top_m(st.tau.size(), m, [&](std::size_t i) { return st.tau[i]; }), rng);
}

inline SchedAction policy_greedy_covariance(const EnvState& st, const Scenario& s, RandomStream& rng) {
  return assign_randomly(
      top_m(s.sensors(), s.channel_count(), [&](std::size_t i) { return s.caches[i].trace_at(st.tau[i]); }), rng);
}

/// The scenario is captured by reference and must outlive the policy.
inline Policy make_policy(PolicyKind kind, const Scenario& s) {
  const std::size_t n = s.sensors();
  const std::size_t m = s.channel_count();
  switch (kind) {
    case PolicyKind::Random:
      return [n, m](const EnvState&, RandomStream& rng) { return policy_random(n, m, rng); };
    case PolicyKind::RoundRobin:
      return [n, m](const EnvState& st, RandomStream& rng) { return policy_round_robin(n, m, st.step_index, rng); };
    case PolicyKind::GreedyHolding:
      return [m](const EnvState& st, RandomStream& rng) { return policy_greedy_holding(st, m, rng); };
    case PolicyKind::GreedyCovariance:
      return [&s](const EnvState& st, RandomStream& rng) { return policy_greedy_covariance(st, s, rng); };
  }
  throw InvalidArgument("make_policy: unknown kind");
}

}  // namespace sensched
