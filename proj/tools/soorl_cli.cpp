#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "soorl/harness.hpp"

using namespace soorl;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int cmd_run(const std::string& config_path) {
  const ExperimentConfig cfg = parse_config(config_path);
  const ExperimentOutput out = run_experiment(cfg);
  for (const auto& s : out.summary) {
    std::cout << to_string(s.mode) << ": episodes_to_consistent_goal " << s.mean_episodes_to_goal << " +- "
              << s.std_episodes_to_goal << " (" << s.consistent_runs << "/" << s.runs << " consistent), mean return "
              << s.mean_return << "\n";
  }
  std::cout << "rows: " << out.rows_path << "\nsummary: " << out.summary_path << "\n";
  return kOk;
}

int cmd_compare(const std::string& config_path, const std::vector<int>& rollouts) {
  ExperimentConfig cfg = parse_config(config_path);
  if (!rollouts.empty()) cfg.rollouts = rollouts;
  const ScalingOutput out = compare_rollout_scaling(cfg);
  for (const auto& s : out.summary) std::cout << "rollouts " << s.rollouts << ": mean return " << s.mean_return << "\n";
  std::cout << "rows: " << out.rows_path << "\nsummary: " << out.summary_path << "\n";
  return kOk;
}

int cmd_learn(const std::string& env_name, const MacroLearnerConfig& lc, const std::string& out_dir) {
  std::unique_ptr<Environment> env;
  try {
    env = make_environment(env_name);
  } catch (const EnvError& e) {
    throw ConfigError("env", 0, e.what());
  }
  const auto result = learn_macro_actions(*env, macro_candidates(*env), lc);
  const auto names = env->action_names();
  const auto ids = env->atomic_actions();
  auto name_of = [&](int id) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) return names[i];
    }
    return std::to_string(id);
  };
  nlohmann::json j;
  j["env"] = env_name;
  j["macros"] = nlohmann::json::array();
  for (const auto& m : complete_macro_set(*env, result.macros)) j["macros"].push_back({name_of(m.atomic), m.noops});
  j["trace"] = nlohmann::json::array();
  for (const auto& t : result.trace) {
    j["trace"].push_back({{"iteration", t.iteration},
                          {"action", name_of(t.action)},
                          {"tried_noops", t.tried_noops},
                          {"total_noops", t.total_noops},
                          {"total_entropy", t.total_entropy},
                          {"accepted", t.accepted}});
  }
  std::filesystem::create_directories(out_dir);
  const auto path = std::filesystem::path(out_dir) / "macros.json";
  std::ofstream os(path);
  if (!(os << j.dump(2) << '\n')) throw IoError("cannot write '" + path.string() + "'");
  std::cout << j["macros"].dump() << "\nwritten: " << path.string() << "\n";
  return kOk;
}

int cmd_dump(const std::string& config_path, const std::string& mode, std::uint64_t seed, int episodes) {
  ExperimentConfig cfg = parse_config(config_path);
  try {
    cfg.agent.planner.mode = mode.empty() ? cfg.modes.front() : parse_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("mode", 0, e.what());
  }
  cfg.agent.macros = resolve_macros(cfg);
  auto env = make_environment(cfg.env);
  SoorlAgent agent(*env, cfg.agent, seed);
  for (int e = 1; e <= episodes; ++e) {
    const auto st = agent.run_episode(*env, seed * 1000 + static_cast<std::uint64_t>(e));
    std::cout << "episode " << e << ": return " << st.episode_return << ", steps " << st.steps << "\n";
  }
  const std::string dir = output_dir(cfg);
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / "models.json";
  std::ofstream os(path);
  if (!(os << agent.models_json().dump(2) << '\n')) throw IoError("cannot write '" + path.string() + "'");
  std::cout << agent.selected_summary() << "\nwritten: " << path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-oriented model-based RL experiments"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run every (mode, seed) pair of an experiment config");
  run->add_option("config", config, "Experiment JSON")->required();

  std::vector<int> rollouts;
  auto* compare = app.add_subcommand("compare-rollouts", "Optimism return per rollout budget");
  compare->add_option("config", config, "Experiment JSON")->required();
  compare->add_option("--rollouts", rollouts, "Budgets overriding the config")->delimiter(',');

  std::string env_name, out_dir = "out/macros";
  MacroLearnerConfig lc;
  auto* learn = app.add_subcommand("learn-macros", "Greedy no-op reduction for an environment");
  learn->add_option("env", env_name, "Environment name")->required();
  learn->add_option("--k-max", lc.k_max, "Initial no-ops per action");
  learn->add_option("--threshold", lc.threshold, "Entropy threshold in nats");
  learn->add_option("--budget", lc.budget_per_eval, "Macro steps per evaluation");
  learn->add_option("--seed", lc.seed, "Data collection seed");
  learn->add_option("--out", out_dir, "Output directory (SOORL_OUT wins)");

  std::string mode;
  std::uint64_t seed = 1;
  int episodes = 1;
  auto* dump = app.add_subcommand("dump-models", "Train an agent and write its model families as JSON");
  dump->add_option("config", config, "Experiment JSON")->required();
  dump->add_option("--mode", mode, "Planner mode (default: first in config)");
  dump->add_option("--seed", seed, "Agent seed");
  dump->add_option("--episodes", episodes, "Episodes to train")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config);
    if (*compare) return cmd_compare(config, rollouts);
    if (*learn) {
      if (const char* env = std::getenv("SOORL_OUT"); env && *env) out_dir = env;
      return cmd_learn(env_name, lc, out_dir);
    }
    if (*dump) return cmd_dump(config, mode, seed, episodes);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
