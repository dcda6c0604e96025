#pragma once

// The scheduling MDP. State is (holding times, last channel outcomes);
// an action assigns M distinct sensors to the M channels; the stage cost is
// the summed trace of the gateway error covariances.
//
// Sensor indices are 0-based throughout.

#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "sensched/channel.hpp"
#include "sensched/errors.hpp"
#include "sensched/rng.hpp"
#include "sensched/scenario.hpp"

namespace sensched {

/// assignment[m] = sensor carried by channel m.
struct SchedAction {
  std::vector<std::size_t> assignment;
  friend bool operator==(const SchedAction&, const SchedAction&) = default;
};

/// N! / (N - M)!
inline std::uint64_t action_count(std::size_t n, std::size_t m) {
  if (m == 0 || m > n) throw InvalidArgument("action_count: need 1 <= M <= N");
  std::uint64_t count = 1;
  for (std::size_t k = n - m + 1; k <= n; ++k) count *= k;
  return count;
}

inline void validate_action(const SchedAction& a, std::size_t n, std::size_t m) {
  if (a.assignment.size() != m) throw InvalidArgument("action: expected " + std::to_string(m) + " entries");
  std::vector<bool> used(n, false);
  for (std::size_t s : a.assignment) {
    if (s >= n) throw InvalidArgument("action: sensor index " + std::to_string(s) + " out of range");
    if (used[s]) throw InvalidArgument("action: sensor " + std::to_string(s) + " assigned twice");
    used[s] = true;
  }
}

/// Lexicographic rank of an ordered M-tuple of distinct sensors.
inline std::uint64_t action_encode(const SchedAction& a, std::size_t n, std::size_t m) {
  validate_action(a, n, m);
  std::vector<bool> used(n, false);
  std::uint64_t index = 0;
  std::uint64_t block = action_count(n, m);
  for (std::size_t pos = 0; pos < m; ++pos) {
    block /= (n - pos);  // completions of the remaining positions
    const std::size_t s = a.assignment[pos];
    std::uint64_t digit = 0;
    for (std::size_t k = 0; k < s; ++k) digit += used[k] ? 0 : 1;
    index += digit * block;
    used[s] = true;
  }
  return index;
}

inline SchedAction action_decode(std::uint64_t index, std::size_t n, std::size_t m) {
  const std::uint64_t total = action_count(n, m);
  if (index >= total) {
    throw InvalidArgument("action_decode: index " + std::to_string(index) + " >= " + std::to_string(total));
  }
  std::vector<std::size_t> free(n);
  std::iota(free.begin(), free.end(), std::size_t{0});
  SchedAction a;
  a.assignment.reserve(m);
  std::uint64_t block = total;
  for (std::size_t pos = 0; pos < m; ++pos) {
    block /= (n - pos);
    const auto digit = static_cast<std::size_t>(index / block);
    index %= block;
    a.assignment.push_back(free[digit]);
    free.erase(free.begin() + static_cast<std::ptrdiff_t>(digit));
  }
  return a;
}

struct EnvState {
  std::vector<std::uint64_t> tau;          // holding times
  std::vector<std::uint8_t> gamma_prev;    // last channel outcomes
  std::uint64_t step_index = 0;
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct EnvOptions {
  bool initial_gamma = true;
  /// Divide the trace block of the observation by tr h_i(Pbar_i).
  bool scale_observation = false;
};

inline EnvState env_reset(const Scenario& s, const EnvOptions& opts = {}) {
  return {std::vector<std::uint64_t>(s.sensors(), 0),
          std::vector<std::uint8_t>(s.channel_count(), opts.initial_gamma ? 1 : 0), 0};
}

/// Sum over sensors of tr h_i^{tau_i}(Pbar_i).
inline double stage_cost(const EnvState& st, const Scenario& s) {
  double cost = 0.0;
  for (std::size_t i = 0; i < s.sensors(); ++i) cost += s.caches[i].trace_at(st.tau[i]);
  return cost;
}

struct StepResult {
  EnvState state;
  double reward = 0.0;  // -stage cost after the step
};

/// One slot: channels realise new outcomes (draw counter = step_index),
/// delivered sensors reset their holding time, the rest increment.
inline StepResult env_step(const EnvState& st, const SchedAction& action, const Scenario& s,
                           const CounterRng& channel_rng) {
  validate_action(action, s.sensors(), s.channel_count());
  const ChannelState next_channels =
      channel_step(std::span<const ChannelModel>(s.channels), ChannelState{st.gamma_prev}, channel_rng, st.step_index);
  StepResult r;
  r.state.tau = st.tau;
  for (auto& t : r.state.tau) ++t;
  for (std::size_t m = 0; m < action.assignment.size(); ++m) {
    if (next_channels.gamma[m] != 0) r.state.tau[action.assignment[m]] = 0;
  }
  r.state.gamma_prev = next_channels.gamma;
  r.state.step_index = st.step_index + 1;
  r.reward = -stage_cost(r.state, s);
  return r;
}

/// (tau_1..tau_N, tr h_1(P_1)..tr h_N(P_N), gamma_1..gamma_M), with
/// P_i = h_i^{tau_i}(Pbar_i), so the middle block is tr h_i^{tau_i + 1}(Pbar_i).
inline Vector observation_build(const EnvState& st, const Scenario& s, const EnvOptions& opts = {}) {
  const std::size_t n = s.sensors();
  const std::size_t m = s.channel_count();
  Vector obs(static_cast<Eigen::Index>(2 * n + m));
  for (std::size_t i = 0; i < n; ++i) {
    obs(static_cast<Eigen::Index>(i)) = static_cast<double>(st.tau[i]);
    double tr = s.caches[i].trace_at(st.tau[i] + 1);
    if (opts.scale_observation) tr /= s.caches[i].trace_at(1);
    obs(static_cast<Eigen::Index>(n + i)) = tr;
  }
  for (std::size_t c = 0; c < m; ++c) obs(static_cast<Eigen::Index>(2 * n + c)) = st.gamma_prev[c];
  return obs;
}

inline std::size_t observation_size(const Scenario& s) { return 2 * s.sensors() + s.channel_count(); }

}  // namespace sensched
