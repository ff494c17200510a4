#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "soorl/envs.hpp"
#include "soorl/models.hpp"
#include "soorl/planning.hpp"

namespace soorl {

/// beta * max(n, 1)^(-1/2).
double exploration_bonus(long n, double beta);

struct TransitionRecord {
  FactoredState before;
  int action = 0;  // index into the agent's macro set
  FactoredState after;
  int reward = 0;
  bool done = false;
};

/// Append-only log of transitions grouped by episode.
class ReplayBuffer {
 public:
  void begin_episode();
  void append(TransitionRecord record);

  const std::vector<TransitionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t episodes() const { return starts_.size(); }
  /// Index of the first record of each episode.
  const std::vector<std::size_t>& episode_starts() const { return starts_; }
  bool operator==(const ReplayBuffer&) const;

 private:
  std::vector<TransitionRecord> records_;
  std::vector<std::size_t> starts_;
};

struct GridSpec {
  int n = 10;  // columns over x
  int m = 8;   // rows over y
};

/// Screen grid over the agent object's location with value iteration on
/// empirical cell-level transitions and count bonuses.
class GridValueFunction {
 public:
  GridValueFunction() = default;
  GridValueFunction(GridSpec grid, Bounds bounds, std::size_t agent_index, int num_actions);

  int num_cells() const { return grid_.n * grid_.m; }
  /// Index of the absorbing terminal cell (one past the screen cells).
  int sink() const { return num_cells(); }
  int cell_of(const ObjectState& agent) const;
  int cell_of(const FactoredState& s) const;

  void tally(const TransitionRecord& r);
  /// Value iteration; sweeps stop at sup-norm change < tol or after max_sweeps.
  void solve(double beta, double gamma, double tol = 1e-6, int max_sweeps = 10000);

  double value(int cell) const { return values_[static_cast<std::size_t>(cell)]; }
  /// V of the agent's cell; 0 once the agent object is gone.
  double value(const FactoredState& s) const;
  long visits(int cell) const { return visits_[static_cast<std::size_t>(cell)]; }
  const std::vector<double>& sweep_deltas() const { return deltas_; }
  /// Empirical next-cell distribution for (cell, action); empty when there is no data.
  std::map<int, double> transition(int cell, int action) const;
  std::size_t agent_index() const { return agent_index_; }

 private:
  std::size_t slot(int cell, int action) const {
    return static_cast<std::size_t>(cell * num_actions_ + action);
  }

  GridSpec grid_;
  Bounds bounds_;
  std::size_t agent_index_ = 0;
  int num_actions_ = 1;
  std::vector<long> visits_;
  std::vector<std::map<int, long>> next_counts_;
  std::vector<double> reward_sums_;
  std::vector<long> action_counts_;
  std::vector<double> values_;
  std::vector<double> deltas_;
};

GridValueFunction train_value_function(const ReplayBuffer& buffer, GridSpec grid, Bounds bounds,
                                       std::size_t agent_index, int num_actions, double beta, double gamma);

enum class TransitionSource { Learned, Oracle };

struct AgentConfig {
  PlannerConfig planner;
  GridSpec grid;
  double beta = 1.0;
  double alpha = 0.5;  // Dirichlet concentration for posterior sampling
  FamilyConfig family;
  // Feature-set index fixed for individual families; the rest select by entropy.
  std::map<FamilyKey, int> pinned;
  // When set, every reward family without an entry in `pinned` uses this feature set.
  std::optional<int> reward_feature_set;
  std::vector<MacroAction> macros;  // empty: every atomic action without no-ops
  TransitionSource transitions = TransitionSource::Learned;
};

struct EpisodeStats {
  int episode = 0;
  double episode_return = 0.0;
  int steps = 0;      // primitive steps
  int decisions = 0;  // macro actions taken
  bool reached_goal = false;
  int model_backoffs = 0;
  long skipped_records = 0;
  std::string selected_feature_sets;
};

/// The SOORL learner: object-level model families, replay buffer, grid value
/// function and per-step strategic planning.
class SoorlAgent {
 public:
  SoorlAgent(const Environment& env, AgentConfig cfg, std::uint64_t seed);

  /// Resets `env` with `env_seed` and plays one episode.
  EpisodeStats run_episode(Environment& env, std::uint64_t env_seed);

  /// Routes one transition to the standalone family of every live object, to the
  /// pairwise transition family of every pair interacting before the step and to
  /// the pairwise reward family of every pair in contact after it. Those pairs
  /// are then marked seen.
  void update_models(const PlanState& before, int action, const FactoredState& after, int reward);

  /// Grows the history of every family flagged for back-off; returns how many grew.
  int apply_backoffs();
  void train_value_function();

  std::unique_ptr<WorldModel> modal_model() const;
  std::unique_ptr<WorldModel> sample_model(std::uint64_t seed) const;
  double bonus(const FactoredState& s) const;
  double value(const FactoredState& s) const { return value_fn_.value(s); }

  const AgentConfig& config() const { return cfg_; }
  const std::vector<MacroAction>& macros() const { return macros_; }
  const std::map<FamilyKey, ModelFamily>& families() const { return families_; }
  bool pair_seen(ClassId a, ClassId b) const;
  const ReplayBuffer& buffer() const { return buffer_; }
  const GridValueFunction& value_function() const { return value_fn_; }
  long live_visits(int cell) const;
  long skipped_records() const { return skipped_; }
  std::size_t history_frames() const;
  std::string selected_summary() const;
  nlohmann::json models_json() const;

  /// Object indices (self, partner) of an interacting pair: self is the member
  /// with the lower class id, or the lower index for same-class pairs.
  static std::pair<std::size_t, std::size_t> pair_roles(const FactoredState& s, const InteractionPair& p);

 private:
  friend class ObjectWorldModel;
  ModelFamily& family(const FamilyKey& key);
  void observe(const FamilyKey& key, const ObjectRecord& record);

  AgentConfig cfg_;
  std::unique_ptr<Environment> oracle_;
  std::vector<MacroAction> macros_;
  std::size_t agent_index_;
  ClassId agent_class_;
  Bounds bounds_;
  std::vector<Outcome> declared_rewards_;
  std::map<FamilyKey, ModelFamily> families_;
  std::set<std::pair<ClassId, ClassId>> seen_pairs_;
  ReplayBuffer buffer_;
  GridValueFunction value_fn_;
  std::vector<long> live_visits_;
  std::mt19937_64 rng_;
  long skipped_ = 0;
  int episodes_ = 0;
};

}  // namespace soorl
