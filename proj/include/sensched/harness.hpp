#pragma once

// Policy evaluation, the baseline/DQN comparison, and CSV output.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sensched/dqn.hpp"
#include "sensched/environment.hpp"
#include "sensched/policies.hpp"
#include "sensched/scenario.hpp"

namespace sensched {

struct EvalReport {
  std::string policy;
  std::size_t steps = 0;
  double empirical_avg_cost = 0.0;
  std::vector<double> per_sensor_mean_trace;
  std::uint64_t seed = 0;
  std::optional<std::size_t> overflow_step;  // first step whose cost was not finite
};

/// One continuous trajectory from env_reset, no episode resets.
inline EvalReport evaluate_policy(const Scenario& s, const Policy& policy, const std::string& name,
                                  std::size_t steps, std::uint64_t seed) {
  const CounterRng root(seed);
  const CounterRng channel_rng = root.fork(0x4556414cull);
  RandomStream policy_rng = make_stream(root, Stream::kPolicy);
  EvalReport rep;
  rep.policy = name;
  rep.steps = steps;
  rep.seed = seed;
  rep.per_sensor_mean_trace.assign(s.sensors(), 0.0);
  EnvState st = env_reset(s);
  double total = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    st = env_step(st, policy(st, policy_rng), s, channel_rng).state;
    for (std::size_t i = 0; i < s.sensors(); ++i) {
      const double tr = s.caches[i].trace_at(st.tau[i]);
      rep.per_sensor_mean_trace[i] += tr;
      total += tr;
    }
    if (!std::isfinite(total)) {
      rep.overflow_step = k;
      rep.empirical_avg_cost = std::numeric_limits<double>::infinity();
      for (auto& v : rep.per_sensor_mean_trace)
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
      return rep;
    }
  }
  if (steps > 0) {
    rep.empirical_avg_cost = total / static_cast<double>(steps);
    for (auto& v : rep.per_sensor_mean_trace) v /= static_cast<double>(steps);
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["policy"] = r.policy;
  j["steps"] = r.steps;
  j["seed"] = r.seed;
  // JSON has no infinity; overflowed runs report null plus the step.
  if (std::isfinite(r.empirical_avg_cost)) j["empirical_avg_cost"] = r.empirical_avg_cost;
  else j["empirical_avg_cost"] = nullptr;
  j["per_sensor_mean_trace"] = nlohmann::ordered_json::array();
  for (double v : r.per_sensor_mean_trace) {
    if (std::isfinite(v)) j["per_sensor_mean_trace"].push_back(v);
    else j["per_sensor_mean_trace"].push_back(nullptr);
  }
  if (r.overflow_step) j["overflow_step"] = *r.overflow_step;
  return j;
}

struct ComparisonRow {
  std::string policy;
  double avg_cost = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string diagnostic;
};

struct CompareOptions {
  std::size_t eval_steps = 50000;
  std::uint64_t eval_seed = 1;
  bool include_ablation = true;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  TrainResult dqn;
  std::optional<TrainResult> ablation;
};

/// Trains the DQN (and optionally the no-replay/no-target ablation), then
/// evaluates every policy on the same evaluation seed.
inline Comparison compare_all(const Scenario& s, const DqnConfig& config, const CompareOptions& opts = {}) {
  Comparison out;
  for (auto kind : {PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::GreedyHolding,
                    PolicyKind::GreedyCovariance}) {
    const auto rep = evaluate_policy(s, make_policy(kind, s), std::string(policy_name(kind)), opts.eval_steps,
                                     opts.eval_seed);
    out.rows.push_back({rep.policy, rep.empirical_avg_cost, false, ""});
  }
  auto learned_row = [&](const std::string& name, const TrainResult& tr) {
    ComparisonRow row{name};
    if (tr.aborted) {
      row.failed = true;
      row.diagnostic = tr.diagnostic;
      return row;
    }
    row.avg_cost =
        evaluate_policy(s, greedy_policy_from(tr.params, s, config.env_options()), name, opts.eval_steps, opts.eval_seed)
            .empirical_avg_cost;
    return row;
  };
  out.dqn = train(config, s);
  out.rows.push_back(learned_row("dqn", out.dqn));
  if (opts.include_ablation) {
    out.ablation = train(config.ablation(), s);
    out.rows.push_back(learned_row("dqn-no-replay-no-target", *out.ablation));
  }
  return out;
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string curve_to_csv(const std::vector<EpisodeRecord>& curve) {
  std::string out = "episode,avg_cost,epsilon,lr,wall_seconds\n";
  for (const auto& r : curve) {
    out += std::to_string(r.episode) + "," + detail::fmt_double(r.avg_cost) + "," + detail::fmt_double(r.epsilon) +
           "," + detail::fmt_double(r.lr) + "," + detail::fmt_double(r.wall_seconds) + "\n";
  }
  return out;
}

inline std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "policy,avg_cost,status\n";
  for (const auto& r : rows) {
    out += r.policy + "," + (r.failed ? std::string("nan") : detail::fmt_double(r.avg_cost)) + "," +
           (r.failed ? "failed" : "ok") + "\n";
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw FormatError("write failed for '" + path + "'");
}

inline void export_curve_csv(const std::vector<EpisodeRecord>& curve, const std::string& path) {
  write_text(path, curve_to_csv(curve));
}

}  // namespace sensched
