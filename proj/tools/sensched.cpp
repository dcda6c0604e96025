// Command-line front end: scenario generation, training, evaluation and comparison.
//
// Exit codes: 0 ok, 1 usage or invalid argument, 2 scenario generation or
// model failure, 3 training failure, 4 file I/O or format failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sensched/sensched.hpp"

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kGeneration = 2, kTraining = 3, kIo = 4 };

struct TrainingFailure : sensched::Error {
  using Error::Error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SENSCHED_SEED")) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
    throw sensched::InvalidArgument("SENSCHED_SEED is not an unsigned integer: '" + std::string(env) + "'");
  }
  return 0;
}

sensched::DqnConfig read_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw sensched::FormatError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw sensched::MalformedFile("config: " + std::string(e.what()));
  }
  return sensched::config_from_json(j);
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") std::cout << text;
  else sensched::write_text(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor scheduling over lossy channels: simulator and DQN workbench"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "RNG seed (default: $SENSCHED_SEED, else 0)");

  // gen-scenario
  auto* gen = app.add_subcommand("gen-scenario", "Generate a random scenario");
  std::size_t n = 6, m = 3;
  std::string gen_out;
  bool allow_unstable = false;
  double max_eig = 1.3;
  std::size_t max_attempts = 1000;
  gen->add_option("--n", n, "Number of sensors")->capture_default_str();
  gen->add_option("--m", m, "Number of channels")->capture_default_str();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output file (default stdout)");
  gen->add_flag("--allow-unstable", allow_unstable, "Skip the stability condition");
  gen->add_option("--max-eigenvalue", max_eig, "Upper end of the eigenvalue range of A")->capture_default_str();
  gen->add_option("--max-attempts", max_attempts, "Redraws before giving up")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a DQN scheduler");
  std::string scenario_path, config_path, weights_out, curve_out;
  bool record_wall = false;
  tr->add_option("--scenario", scenario_path, "Scenario file")->required();
  tr->add_option("--config", config_path, "DQN config JSON");
  tr->add_option("--weights-out", weights_out, "Weight file to write")->required();
  tr->add_option("--curve-out", curve_out, "Training curve CSV");
  tr->add_option("--seed", seed, "Training seed (overrides the config)");
  tr->add_flag("--record-wall-time", record_wall, "Fill the wall_seconds column");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate one policy");
  std::string policy_name, weights_in, eval_out;
  std::size_t steps = 50000;
  ev->add_option("--scenario", scenario_path, "Scenario file")->required();
  ev->add_option("--policy", policy_name, "random|roundrobin|greedy-tau|greedy-cov|dqn")
      ->required()
      ->check(CLI::IsMember({"random", "roundrobin", "greedy-tau", "greedy-cov", "dqn"}));
  ev->add_option("--weights", weights_in, "Weight file (dqn only)");
  ev->add_option("--config", config_path, "DQN config used for training (observation scaling)");
  ev->add_option("--steps", steps, "Evaluation steps")->capture_default_str();
  ev->add_option("--seed", seed, "Evaluation seed");
  ev->add_option("--out", eval_out, "Report file (default stdout)");

  // compare
  auto* cmp = app.add_subcommand("compare", "Train and evaluate every policy on one scenario");
  std::string compare_out;
  bool no_ablation = false;
  cmp->add_option("--scenario", scenario_path, "Scenario file")->required();
  cmp->add_option("--config", config_path, "DQN config JSON");
  cmp->add_option("--out", compare_out, "Output CSV (default stdout)");
  cmp->add_option("--steps", steps, "Evaluation steps")->capture_default_str();
  cmp->add_option("--seed", seed, "Training and evaluation seed");
  cmp->add_flag("--no-ablation", no_ablation, "Skip the no-replay/no-target run");

  // check-stability
  auto* chk = app.add_subcommand("check-stability", "Print the stability report");
  chk->add_option("--scenario", scenario_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    using namespace sensched;
    const std::uint64_t s = seed ? *seed : default_seed();

    if (*gen) {
      GenerationOptions opts;
      opts.require_stable = !allow_unstable;
      opts.max_eigenvalue = max_eig;
      opts.max_attempts = max_attempts;
      emit(scenario_to_string(scenario_generate(n, m, s, opts)), gen_out);
    } else if (*tr) {
      const Scenario sc = load_scenario(scenario_path);
      DqnConfig cfg = read_config(config_path);
      if (seed || config_path.empty()) cfg.seed = s;
      if (record_wall) cfg.record_wall_time = true;
      const TrainResult res = train(cfg, sc);
      if (!curve_out.empty()) export_curve_csv(res.curve, curve_out);
      if (res.aborted) throw TrainingFailure("training aborted: " + res.diagnostic);
      save_weights(res.params, weights_out);
      std::cerr << "trained " << res.curve.size() << " episodes, final avg cost "
                << (res.curve.empty() ? 0.0 : res.curve.back().avg_cost) << "\n";
    } else if (*ev) {
      const Scenario sc = load_scenario(scenario_path);
      Policy policy;
      if (policy_name == "dqn") {
        if (weights_in.empty()) throw InvalidArgument("--policy dqn needs --weights");
        policy = greedy_policy_from(load_weights(weights_in), sc, read_config(config_path).env_options());
      } else {
        policy = make_policy(*parse_policy_kind(policy_name), sc);
      }
      const EvalReport rep = evaluate_policy(sc, policy, policy_name, steps, s);
      emit(to_json(rep).dump(2) + "\n", eval_out);
      if (rep.overflow_step) std::cerr << "cost overflowed at step " << *rep.overflow_step << "\n";
    } else if (*cmp) {
      const Scenario sc = load_scenario(scenario_path);
      DqnConfig cfg = read_config(config_path);
      if (seed || config_path.empty()) cfg.seed = s;
      CompareOptions opts;
      opts.eval_steps = steps;
      opts.eval_seed = s;
      opts.include_ablation = !no_ablation;
      const Comparison c = compare_all(sc, cfg, opts);
      emit(comparison_to_csv(c.rows), compare_out);
    } else if (*chk) {
      std::cout << stability_check(load_scenario(scenario_path));
    }
  } catch (const sensched::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const sensched::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGeneration;
  } catch (const sensched::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGeneration;
  } catch (const sensched::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGeneration;
  } catch (const TrainingFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const sensched::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const sensched::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
