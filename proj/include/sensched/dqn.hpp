#pragma once

// Deep Q-learning for the scheduling MDP: experience replay, epsilon-greedy
// exploration, a lagged target network, and mini-batch Adam updates.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sensched/environment.hpp"
#include "sensched/neural.hpp"
#include "sensched/policies.hpp"

namespace sensched {

struct Transition {
  Vector s;
  std::size_t a = 0;
  double r = 0.0;
  Vector s_next;
};

/// Fixed-capacity ring; once full the oldest transition is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidArgument("replay buffer: capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const {
    if (i >= items_.size()) throw InvalidArgument("replay buffer: index out of range");
    return items_.size() < capacity_ ? items_[i] : items_[(head_ + i) % capacity_];
  }

  const Transition& latest() const { return at(size() - 1); }

  /// Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t batch, RandomStream& rng) const {
    if (empty()) throw InvalidArgument("replay buffer: sampling from an empty buffer");
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t j = 0; j < batch; ++j) out.push_back(&items_[rng.below(items_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

struct DqnConfig {
  double discount = 0.95;
  double epsilon_start = 1.0;
  double epsilon_min = 0.01;
  double epsilon_decay = 0.999;
  std::uint64_t target_sync_period = 100;
  std::size_t minibatch_size = 32;
  std::size_t episode_length = 500;
  std::size_t episodes = 100;
  std::vector<std::size_t> hidden_sizes{128, 128};
  LrSchedule lr{};
  std::size_t replay_capacity = 20000;
  /// false: each update uses only the most recent transition.
  bool use_replay = true;
  bool scale_observation = false;
  bool record_wall_time = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(discount > 0.0 && discount < 1.0)) throw InvalidArgument("dqn config: discount must lie in (0, 1)");
    if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon_start && epsilon_start <= 1.0)) {
      throw InvalidArgument("dqn config: need 0 <= epsilon_min <= epsilon_start <= 1");
    }
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw InvalidArgument("dqn config: epsilon_decay in (0, 1]");
    if (target_sync_period == 0) throw InvalidArgument("dqn config: target_sync_period must be >= 1");
    if (minibatch_size == 0 || replay_capacity == 0) throw InvalidArgument("dqn config: sizes must be positive");
    if (episode_length == 0) throw InvalidArgument("dqn config: episode_length must be positive");
    if (!(lr.alpha0 > 0.0) || lr.decay < 0.0) throw InvalidArgument("dqn config: bad learning-rate schedule");
  }

  /// No experience replay and no target lag.
  DqnConfig ablation() const {
    DqnConfig c = *this;
    c.use_replay = false;
    c.target_sync_period = 1;
    return c;
  }

  /// Full-size network and schedule.
  static DqnConfig full_profile() {
    DqnConfig c;
    c.hidden_sizes = {1024, 1024};
    c.episodes = 200;
    return c;
  }

  EnvOptions env_options() const {
    EnvOptions o;
    o.scale_observation = scale_observation;
    return o;
  }
};

inline nlohmann::ordered_json config_to_json(const DqnConfig& c) {
  return {{"discount", c.discount},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_min", c.epsilon_min},
          {"epsilon_decay", c.epsilon_decay},
          {"target_sync_period", c.target_sync_period},
          {"minibatch_size", c.minibatch_size},
          {"episode_length", c.episode_length},
          {"episodes", c.episodes},
          {"hidden_sizes", c.hidden_sizes},
          {"lr_initial", c.lr.alpha0},
          {"lr_decay", c.lr.decay},
          {"replay_capacity", c.replay_capacity},
          {"use_replay", c.use_replay},
          {"scale_observation", c.scale_observation},
          {"record_wall_time", c.record_wall_time},
          {"seed", c.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline DqnConfig config_from_json(const nlohmann::json& j) {
  DqnConfig c;
  if (!j.is_object()) throw MalformedFile("dqn config: expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "discount") c.discount = v.get<double>();
      else if (key == "epsilon_start") c.epsilon_start = v.get<double>();
      else if (key == "epsilon_min") c.epsilon_min = v.get<double>();
      else if (key == "epsilon_decay") c.epsilon_decay = v.get<double>();
      else if (key == "target_sync_period") c.target_sync_period = v.get<std::uint64_t>();
      else if (key == "minibatch_size") c.minibatch_size = v.get<std::size_t>();
      else if (key == "episode_length") c.episode_length = v.get<std::size_t>();
      else if (key == "episodes") c.episodes = v.get<std::size_t>();
      else if (key == "hidden_sizes") c.hidden_sizes = v.get<std::vector<std::size_t>>();
      else if (key == "lr_initial") {
        // "exp(-4)" selects e^-4 literally; numbers are taken as given.
        if (v.is_string() && v.get<std::string>() == "exp(-4)") c.lr.alpha0 = std::exp(-4.0);
        else c.lr.alpha0 = v.get<double>();
      } else if (key == "lr_decay") c.lr.decay = v.get<double>();
      else if (key == "replay_capacity") c.replay_capacity = v.get<std::size_t>();
      else if (key == "use_replay") c.use_replay = v.get<bool>();
      else if (key == "scale_observation") c.scale_observation = v.get<bool>();
      else if (key == "record_wall_time") c.record_wall_time = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw MalformedFile("dqn config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("dqn config: ") + e.what());
  }
  c.validate();
  return c;
}

struct AgentState {
  MlpParams online;
  MlpParams target;
  AdamState opt;
  double epsilon = 1.0;
  std::uint64_t global_step = 0;
};

inline std::vector<std::size_t> network_sizes(const DqnConfig& c, std::size_t inputs, std::size_t actions) {
  std::vector<std::size_t> sizes{inputs};
  sizes.insert(sizes.end(), c.hidden_sizes.begin(), c.hidden_sizes.end());
  sizes.push_back(actions);
  return sizes;
}

inline AgentState make_agent(const DqnConfig& c, std::size_t inputs, std::size_t actions) {
  RandomStream init = make_stream(CounterRng(c.seed), Stream::kWeightInit);
  AgentState a;
  a.online = MlpParams::glorot(network_sizes(c, inputs, actions), init);
  a.target = a.online;
  a.opt = AdamState::for_params(a.online);
  a.epsilon = c.epsilon_start;
  return a;
}

/// First index of the maximum.
inline std::size_t argmax_lowest(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

/// One uniform draw decides explore vs exploit; a second picks the random action.
inline std::size_t act_epsilon_greedy(const AgentState& agent, const Vector& obs, RandomStream& rng) {
  const std::size_t actions = agent.online.output_size();
  if (rng.uniform() < agent.epsilon) return static_cast<std::size_t>(rng.below(actions));
  return argmax_lowest(mlp_forward(agent.online, obs));
}

/// z_j = r_j + discount * max_a' Qtarget(s'_j, a'). No terminal masking.
inline std::vector<double> compute_targets(const MlpParams& target, const Matrix& next_obs,
                                           std::span<const double> rewards, double discount) {
  if (static_cast<std::size_t>(next_obs.cols()) != rewards.size()) {
    throw InvalidArgument("compute_targets: batch size mismatch");
  }
  const Matrix q = mlp_forward_batch(target, next_obs);
  std::vector<double> z(rewards.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = rewards[j] + discount * q.col(static_cast<Eigen::Index>(j)).maxCoeff();
    if (!std::isfinite(z[j])) throw NumericalError("compute_targets: non-finite target");
  }
  return z;
}

inline double decayed_epsilon(const DqnConfig& c, double eps) {
  return std::max(c.epsilon_decay * eps, c.epsilon_min);
}

struct EpisodeRecord {
  std::size_t episode = 0;
  double avg_cost = 0.0;
  double epsilon = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

/// Owns one learning run on one scenario. The scenario must outlive it.
class DqnTrainer {
 public:
  DqnTrainer(const DqnConfig& config, const Scenario& scenario)
      : config_(config),
        scenario_(scenario),
        env_opts_(config.env_options()),
        n_actions_(static_cast<std::size_t>(action_count(scenario.sensors(), scenario.channel_count()))),
        agent_(make_agent(config, observation_size(scenario), n_actions_)),
        buffer_(config.replay_capacity),
        root_(config.seed),
        explore_(make_stream(root_, Stream::kExploration)),
        replay_(make_stream(root_, Stream::kReplay)) {
    config_.validate();
    begin_episode();
  }

  /// Resets the environment with a fresh channel stream.
  void begin_episode() {
    state_ = env_reset(scenario_, env_opts_);
    obs_ = observation_build(state_, scenario_, env_opts_);
    channel_rng_ = root_.fork(0x45504953ull + episode_);
    ++episode_;
  }

  /// Act, step, store, (maybe) learn, (maybe) sync, decay epsilon. Returns the reward.
  double train_step() {
    const std::size_t a = act_epsilon_greedy(agent_, obs_, explore_);
    const StepResult step =
        env_step(state_, action_decode(a, scenario_.sensors(), scenario_.channel_count()), scenario_, channel_rng_);
    if (!std::isfinite(step.reward)) {
      throw NumericalError("train_step: stage cost overflowed at global step " + std::to_string(agent_.global_step));
    }
    Vector next_obs = observation_build(step.state, scenario_, env_opts_);
    buffer_.push({obs_, a, step.reward, next_obs});
    state_ = step.state;
    obs_ = std::move(next_obs);

    if (config_.use_replay) {
      if (buffer_.size() >= config_.minibatch_size) learn(buffer_.sample(config_.minibatch_size, replay_));
    } else {
      learn({&buffer_.latest()});
    }
    ++agent_.global_step;
    if (agent_.global_step % config_.target_sync_period == 0) agent_.target = agent_.online;
    agent_.epsilon = decayed_epsilon(config_, agent_.epsilon);
    return step.reward;
  }

  const AgentState& agent() const { return agent_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const EnvState& env_state() const { return state_; }
  std::size_t episodes_started() const { return episode_; }
  double current_lr() const { return config_.lr.rate(agent_.opt.timestep); }

 private:
  void learn(const std::vector<const Transition*>& batch) {
    const auto dim = static_cast<Eigen::Index>(agent_.online.input_size());
    const auto b = static_cast<Eigen::Index>(batch.size());
    Matrix s(dim, b), s_next(dim, b);
    std::vector<std::size_t> actions(batch.size());
    std::vector<double> rewards(batch.size());
    for (Eigen::Index j = 0; j < b; ++j) {
      const Transition& t = *batch[static_cast<std::size_t>(j)];
      s.col(j) = t.s;
      s_next.col(j) = t.s_next;
      actions[static_cast<std::size_t>(j)] = t.a;
      rewards[static_cast<std::size_t>(j)] = t.r;
    }
    const auto z = compute_targets(agent_.target, s_next, rewards, config_.discount);
    const LossAndGradient lg = loss_and_gradient(agent_.online, s, actions, z);
    adam_update(agent_.online, lg.grad, agent_.opt, config_.lr);
    if (!agent_.online.all_finite()) throw NumericalError("train_step: parameters became non-finite");
  }

  DqnConfig config_;
  const Scenario& scenario_;
  EnvOptions env_opts_;
  std::size_t n_actions_;
  AgentState agent_;
  ReplayBuffer buffer_;
  CounterRng root_;
  RandomStream explore_;
  RandomStream replay_;
  CounterRng channel_rng_{};
  EnvState state_;
  Vector obs_;
  std::size_t episode_ = 0;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpisodeRecord> curve;
  bool aborted = false;
  std::string diagnostic;
};

/// Runs config.episodes episodes of config.episode_length steps, resetting
/// the environment at each episode start. A numerical failure stops the run
/// and returns the curve so far.
inline TrainResult train(const DqnConfig& config, const Scenario& scenario) {
  config.validate();
  DqnTrainer trainer(config, scenario);
  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    if (ep > 0) trainer.begin_episode();
    double cost = 0.0;
    try {
      for (std::size_t k = 0; k < config.episode_length; ++k) cost -= trainer.train_step();
    } catch (const NumericalError& e) {
      result.aborted = true;
      result.diagnostic = "episode " + std::to_string(ep) + ": " + e.what();
      break;
    }
    EpisodeRecord rec;
    rec.episode = ep;
    rec.avg_cost = cost / static_cast<double>(config.episode_length);
    rec.epsilon = trainer.agent().epsilon;
    rec.lr = trainer.current_lr();
    if (config.record_wall_time) {
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.curve.push_back(rec);
  }
  result.params = trainer.agent().online;
  return result;
}

/// Deterministic argmax policy over a trained network.
inline Policy greedy_policy_from(MlpParams params, const Scenario& scenario, EnvOptions opts = {}) {
  const std::size_t n = scenario.sensors();
  const std::size_t m = scenario.channel_count();
  if (params.output_size() != action_count(n, m) || params.input_size() != observation_size(scenario)) {
    throw InvalidArgument("greedy_policy_from: network shape does not match the scenario");
  }
  return [params = std::move(params), &scenario, opts, n, m](const EnvState& st, RandomStream&) {
    const Vector q = mlp_forward(params, observation_build(st, scenario, opts));
    return action_decode(argmax_lowest(q), n, m);
  };
}

}  // namespace sensched
