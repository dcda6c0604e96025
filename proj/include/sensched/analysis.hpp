#pragma once

// Computable pieces of the boundedness argument: the P_L upper bound, the
// single-channel threshold policy that witnesses boundedness, and the
// discounted-vs-average cost comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sensched/environment.hpp"
#include "sensched/policies.hpp"
#include "sensched/stability.hpp"

namespace sensched {

/// log of (N-1) * binom(L, N-1) * (1-q)^(L-2n). Requires L > 2N, n < N,
/// 0 < q <= 1; returns -inf when the bound is exactly zero.
inline double log_pl_upper_bound(std::size_t n_sensors, std::size_t horizon, double q_star, std::size_t n) {
  if (horizon <= 2 * n_sensors) throw InvalidArgument("pl_upper_bound: need L > 2N");
  if (n >= n_sensors) throw InvalidArgument("pl_upper_bound: need n < N");
  if (!(q_star > 0.0 && q_star <= 1.0)) throw InvalidArgument("pl_upper_bound: need 0 < q <= 1");
  const double ninf = -std::numeric_limits<double>::infinity();
  if (n_sensors == 1 || q_star == 1.0) return ninf;
  const double k = static_cast<double>(n_sensors - 1);
  const double l = static_cast<double>(horizon);
  const double log_binom = std::lgamma(l + 1.0) - std::lgamma(k + 1.0) - std::lgamma(l - k + 1.0);
  const double exponent = l - 2.0 * static_cast<double>(n);
  return std::log(k) + log_binom + exponent * std::log1p(-q_star);
}

/// May underflow to 0 for long horizons; use log_pl_upper_bound for roots.
inline double pl_upper_bound(std::size_t n_sensors, std::size_t horizon, double q_star, std::size_t n) {
  return std::exp(log_pl_upper_bound(n_sensors, horizon, q_star, n));
}

/// Last-half test: the running average never exceeds twice its last-half median.
inline bool bounded_trend(const std::vector<double>& running_avg) {
  if (running_avg.size() < 2) return true;
  std::vector<double> tail(running_avg.begin() + static_cast<std::ptrdiff_t>(running_avg.size() / 2),
                           running_avg.end());
  for (double v : tail)
    if (!std::isfinite(v)) return false;
  const double peak = *std::max_element(tail.begin(), tail.end());
  std::nth_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() / 2), tail.end());
  const double median = tail[tail.size() / 2];
  return peak < 2.0 * median;
}

struct DemoResult {
  double average_cost = 0.0;
  std::vector<double> running_average;  // after each step
  std::size_t channel = 0;              // m* = argmax q
  std::size_t transmissions = 0;
};

/// Only the channel with the largest recovery rate is used. Each step the
/// sensor with the largest holding time (smallest index on ties) transmits
/// on it, provided that holding time exceeds `threshold`; otherwise nothing
/// is sent.
inline DemoResult stabilizing_policy_demo(const Scenario& s, std::size_t threshold, std::size_t steps,
                                          const CounterRng& rng) {
  DemoResult out;
  for (std::size_t m = 1; m < s.channel_count(); ++m) {
    if (s.channels[m].q > s.channels[out.channel].q) out.channel = m;
  }
  const ChannelModel& ch = s.channels[out.channel];
  std::vector<std::uint64_t> tau(s.sensors(), 0);
  std::uint8_t gamma = 1;
  double total = 0.0;
  out.running_average.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < tau.size(); ++i)
      if (tau[i] > tau[pick]) pick = i;
    const bool transmit = tau[pick] > threshold;
    gamma = channel_transition(ch, gamma, rng.uniform(out.channel, k));
    for (auto& t : tau) ++t;
    if (transmit && gamma != 0) {
      tau[pick] = 0;
      ++out.transmissions;
    }
    double cost = 0.0;
    for (std::size_t i = 0; i < tau.size(); ++i) cost += s.caches[i].trace_at(tau[i]);
    total += cost;
    out.running_average.push_back(total / static_cast<double>(k + 1));
  }
  out.average_cost = steps > 0 ? total / static_cast<double>(steps) : 0.0;
  return out;
}

struct AbelRow {
  double discount = 0.0;
  double discounted = 0.0;    // (1 - d) * sum_k d^k J_k
  double time_average = 0.0;  // (1/T) * sum_k J_k
  bool diverging = false;
};

/// Discounted-normalised and time-averaged sums of one cost sequence. A
/// sequence is marked diverging when it is non-finite or its second-half
/// mean exceeds twice its first-half mean.
inline std::vector<AbelRow> abel_table(const std::vector<double>& costs, const std::vector<double>& discounts) {
  double sum = 0.0, first = 0.0, second = 0.0;
  const std::size_t half = costs.size() / 2;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    sum += costs[k];
    (k < half ? first : second) += costs[k];
  }
  const double avg = costs.empty() ? 0.0 : sum / static_cast<double>(costs.size());
  bool diverging = !std::isfinite(sum);
  if (half > 0 && costs.size() - half > 0) {
    const double m1 = first / static_cast<double>(half);
    const double m2 = second / static_cast<double>(costs.size() - half);
    if (m2 > 2.0 * m1) diverging = true;
  }
  std::vector<AbelRow> rows;
  for (double d : discounts) {
    if (!(d > 0.0 && d < 1.0)) throw InvalidArgument("abel_table: discounts must lie in (0, 1)");
    double acc = 0.0, weight = 1.0;
    for (double j : costs) {
      acc += weight * j;
      weight *= d;
    }
    rows.push_back({d, (1.0 - d) * acc, avg, diverging});
  }
  return rows;
}

/// One trajectory of `horizon` steps under `policy`, summarised for each discount.
inline std::vector<AbelRow> discount_vs_average(const Scenario& s, const Policy& policy,
                                                const std::vector<double>& discounts, std::size_t horizon,
                                                std::uint64_t seed) {
  const CounterRng root(seed);
  const CounterRng channel_rng = root.fork(0x43484eull);
  RandomStream policy_rng = make_stream(root, Stream::kPolicy);
  EnvState st = env_reset(s);
  std::vector<double> costs;
  costs.reserve(horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    const StepResult r = env_step(st, policy(st, policy_rng), s, channel_rng);
    costs.push_back(-r.reward);
    st = r.state;
  }
  return abel_table(costs, discounts);
}

}  // namespace sensched
