#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soorl/agent.hpp"
#include "soorl/macros.hpp"

namespace soorl {

/// Invalid experiment configuration. `key_path` is dotted ("planner.ucb_c",
/// "agent.pinned[1].self"); `line` is 1-based, or 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, int line, const std::string& message);
  const std::string& key_path() const { return key_path_; }
  int line() const { return line_; }

 private:
  std::string key_path_;
  int line_;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// How the agent's macro set is obtained.
struct MacroSpec {
  enum class Kind { Atomic, Fixed, Learned };
  Kind kind = Kind::Atomic;
  std::vector<MacroAction> fixed;
  MacroLearnerConfig learner;
};

struct ExperimentConfig {
  std::string env;
  std::vector<PlannerMode> modes{PlannerMode::Optimism};
  std::vector<std::uint64_t> seeds;
  int episodes = 30;
  bool stop_when_consistent = false;  // end a run after three consecutive goals
  int workers = 1;
  std::string output_dir = "out";
  AgentConfig agent;  // planner.mode is overridden per run
  MacroSpec macros;
  std::vector<int> rollouts;  // budgets for compare_rollout_scaling

  /// Fully resolved configuration in the input schema.
  nlohmann::json to_json() const;
};

ExperimentConfig parse_config_text(const std::string& text);
/// Throws IoError when the file cannot be read.
ExperimentConfig parse_config(const std::string& path);

/// First 1-based episode e with e, e+1, e+2 all reaching the goal.
std::optional<int> episodes_to_consistent_goal(const std::vector<bool>& reached);

struct ResultRow {
  std::string env;
  PlannerMode mode = PlannerMode::Optimism;
  std::uint64_t seed = 0;
  int episode = 0;
  double episode_return = 0.0;
  int steps = 0;
  bool reached_goal = false;
  std::optional<int> episodes_to_consistent_goal;  // per run, repeated on each of its rows
  int model_backoffs = 0;
  std::string selected_feature_sets;
};

struct SummaryRow {
  PlannerMode mode = PlannerMode::Optimism;
  int runs = 0;
  int consistent_runs = 0;
  double mean_episodes_to_goal = 0.0;  // runs that never became consistent count as episodes + 1
  double std_episodes_to_goal = 0.0;
  double mean_return = 0.0;            // over all episode rows
  double std_return = 0.0;
};

/// Macro set handed to the agent for this config.
std::vector<MacroAction> resolve_macros(const ExperimentConfig& cfg);

/// Rows of every (mode, seed) run in that order.
std::vector<ResultRow> run_rows(const ExperimentConfig& cfg);
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, int episodes);

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& summary);

struct ExperimentOutput {
  std::string rows_path;
  std::string summary_path;
  std::string config_path;
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
};

/// Runs every (mode, seed) pair and writes rows.csv, summary.csv and config.json to the output directory.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

struct ScalingRow {
  int rollouts = 0;
  int runs = 0;
  double mean_return = 0.0;
};

struct ScalingOutput {
  std::string rows_path;
  std::string summary_path;
  std::vector<ResultRow> rows;  // one block per budget, in budget order
  std::vector<int> row_rollouts;
  std::vector<ScalingRow> summary;
};

/// Optimism agent at each budget in `cfg.rollouts` (strictly increasing) over every seed.
ScalingOutput compare_rollout_scaling(const ExperimentConfig& cfg);

/// Output directory with SOORL_OUT taking precedence over the config.
std::string output_dir(const ExperimentConfig& cfg);

}  // namespace soorl
