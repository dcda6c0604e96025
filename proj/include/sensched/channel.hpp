#pragma once

// Gilbert-Elliott packet-drop channels.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sensched/errors.hpp"
#include "sensched/rng.hpp"

namespace sensched {

/// p = P(fail | previous success), q = P(success | previous failure).
struct ChannelModel {
  double p = 0.0;
  double q = 1.0;

  ChannelModel() = default;
  ChannelModel(double fail, double recover) : p(fail), q(recover) {
    if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0)) {
      throw InvalidArgument("channel model: p and q must lie in [0, 1]");
    }
  }

  friend bool operator==(const ChannelModel&, const ChannelModel&) = default;
};

struct ChannelState {
  std::vector<std::uint8_t> gamma;  // 1 = last transmission on channel m got through

  static ChannelState all(std::size_t channels, bool success = true) {
    return {std::vector<std::uint8_t>(channels, success ? 1 : 0)};
  }
  friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

/// Long-run fraction of successful slots, q / (p + q).
inline double stationary_success_prob(const ChannelModel& m) {
  if (m.p + m.q <= 0.0) {
    throw InvalidArgument("stationary_success_prob: p = q = 0 has no unique stationary law");
  }
  return m.q / (m.p + m.q);
}

/// Single-channel transition driven by a uniform draw u in [0, 1).
inline std::uint8_t channel_transition(const ChannelModel& m, std::uint8_t prev, double u) {
  if (prev != 0) return u < m.p ? 0 : 1;
  return u < m.q ? 1 : 0;
}

/// Advances every channel one slot. Channel m reads draw (stream m, counter
/// slot) of rng, so channels are independent by construction and a given slot
/// is reproducible regardless of how many other draws happened.
inline ChannelState channel_step(std::span<const ChannelModel> models, const ChannelState& state,
                                 const CounterRng& rng, std::uint64_t slot) {
  if (models.size() != state.gamma.size()) {
    throw InvalidArgument("channel_step: " + std::to_string(models.size()) + " models but " +
                          std::to_string(state.gamma.size()) + " channel states");
  }
  ChannelState next = state;
  for (std::size_t m = 0; m < models.size(); ++m) {
    next.gamma[m] = channel_transition(models[m], state.gamma[m], rng.uniform(m, slot));
  }
  return next;
}

}  // namespace sensched
