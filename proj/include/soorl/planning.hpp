#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "soorl/models.hpp"
#include "soorl/oomdp.hpp"

namespace soorl {

class Environment;

enum class PlannerMode { MLE, Optimism, ThompsonSampling, BAMCP };

std::string to_string(PlannerMode mode);
/// Accepts "mle", "optimism", "ts", "bamcp". Throws std::invalid_argument otherwise.
PlannerMode parse_mode(const std::string& name);

struct PlannerConfig {
  int depth = 10;
  int rollouts = 500;  // L, used by MLE, Optimism and Thompson sampling
  int models = 500;    // K, used by BAMCP with one rollout per model
  double ucb_c = 1.0;
  double gamma = 0.99;
  double r_max = 10000.0;
  PlannerMode mode = PlannerMode::Optimism;
  bool leaf_value = true;  // bootstrap with V(o_d); false returns 0 at the depth limit
};

/// Throws std::invalid_argument on out-of-range fields.
void validate(const PlannerConfig& cfg);

/// Models sampled and rollouts per model for the configured mode.
struct SearchShape {
  int models = 1;
  int rollouts_per_model = 1;
};
SearchShape search_shape(const PlannerConfig& cfg);

/// Objects at the decision point plus the recent frames that history-t models read.
struct PlanState {
  FactoredState current;
  std::vector<FactoredState> past;  // oldest first
  std::vector<int> past_actions;    // past_actions[i] was taken in past[i]
  /// Simulator positioned at `current`, for models that replay true dynamics.
  std::shared_ptr<const Environment> snapshot;

  /// Appends `next` reached by `action`, keeping at most `keep` past frames.
  PlanState advanced(FactoredState next, int action, std::size_t keep) const;
};

struct ModelStep {
  FactoredState next;
  double reward = 0.0;
  bool terminal = false;
  bool known = true;   // every model query involved was answered
  bool novel = false;  // the step involves a never-observed interaction pair
  std::shared_ptr<const Environment> snapshot;  // simulator positioned at `next`, if any
};

/// Deterministic simulator over plan states; actions are indices into the macro set.
class WorldModel {
 public:
  virtual ~WorldModel() = default;
  virtual int num_actions() const = 0;
  virtual ModelStep step(const PlanState& state, int action) const = 0;
  /// Past frames a caller should retain for this model.
  virtual std::size_t history_needed() const { return 0; }
};

using ValueFn = std::function<double(const FactoredState&)>;
using BonusFn = std::function<double(const FactoredState&)>;

/// Wraps `base`: unknown queries and novel interactions end the rollout with
/// reward r_max; otherwise `bonus(next)` is added to the reward.
class OptimisticModel final : public WorldModel {
 public:
  OptimisticModel(const WorldModel& base, double r_max, BonusFn bonus = {})
      : base_(base), r_max_(r_max), bonus_(std::move(bonus)) {}
  int num_actions() const override { return base_.num_actions(); }
  ModelStep step(const PlanState& state, int action) const override;
  std::size_t history_needed() const override { return base_.history_needed(); }

 private:
  const WorldModel& base_;
  double r_max_;
  BonusFn bonus_;
};

std::unique_ptr<WorldModel> make_optimistic(const WorldModel& base, double r_max, BonusFn bonus = {});

/// Explicit deterministic MDP. States are encoded as one object whose x is the state id.
class TabularModel final : public WorldModel {
 public:
  TabularModel(int num_states, int num_actions);
  void set(int s, int a, int next, double reward, bool terminal = false);
  void set_unknown(int s, int a);

  int num_states() const { return num_states_; }
  int num_actions() const override { return num_actions_; }
  ModelStep step(const PlanState& state, int action) const override;

  static FactoredState encode(int s);
  static int decode(const FactoredState& s);

  struct Entry {
    int next = 0;
    double reward = 0.0;
    bool terminal = false;
    bool known = true;
  };
  const Entry& entry(int s, int a) const { return table_[static_cast<std::size_t>(s * num_actions_ + a)]; }

 private:
  int num_states_;
  int num_actions_;
  std::vector<Entry> table_;
};

/// Finite-horizon optimal Q at `s` with `horizon` steps left and leaf value 0.
std::vector<double> finite_horizon_q(const TabularModel& m, int s, int horizon, double gamma);

// ---------------------------------------------------------------------------

struct ActionStats {
  long visits = 0;
  double q = 0.0;
};

struct SearchNode {
  long visits = 0;
  std::vector<ActionStats> actions;
};

/// Nodes are keyed by (depth, state key): the same objects at a different depth are a different node.
class SearchTree {
 public:
  struct Key {
    int depth = 0;
    StateKey state;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<StateKey>{}(k.state) * 31u + static_cast<std::size_t>(k.depth);
    }
  };

  SearchNode& node(int depth, const FactoredState& s, int num_actions);
  const SearchNode* find(int depth, const FactoredState& s) const;
  std::size_t node_count() const { return nodes_.size(); }
  const std::unordered_map<Key, SearchNode, KeyHash>& nodes() const { return nodes_; }

 private:
  std::unordered_map<Key, SearchNode, KeyHash> nodes_;
};

struct RolloutTrace {
  std::vector<StateKey> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> returns;  // backed-up return at each visited node
};

struct PlanResult {
  int best_action = 0;
  std::vector<double> q;
  std::vector<long> visits;
  std::size_t tree_nodes = 0;
};

/// UCB1 choice at a node: untried actions first in id order, then the argmax of
/// Q + c sqrt(log N / N_a) with ties to the lowest id.
int select_ucb(const SearchNode& node, double c);

/// Lowest-id argmax over Q of visited actions (unvisited actions only if none was visited).
int best_root_action(const SearchNode& root);

/// Runs `rollouts` simulations from `root` into `tree`.
void uct_search(const WorldModel& model, const PlanState& root, const PlannerConfig& cfg, int rollouts,
                const ValueFn& value_fn, SearchTree& tree, std::vector<RolloutTrace>* trace = nullptr);

PlanResult uct_plan(const WorldModel& model, const PlanState& root, const PlannerConfig& cfg,
                    const ValueFn& value_fn, std::vector<RolloutTrace>* trace = nullptr);

PlanResult root_result(const SearchTree& tree, const PlanState& root, int num_actions);

// ---------------------------------------------------------------------------

/// Dirichlet-categorical posterior over outcomes for one context.
struct ModelPosterior {
  double alpha = 0.5;

  /// Draws from Dirichlet(alpha + counts) over `support`, then a categorical from it.
  /// `counts` may be null (a never-observed context); support must be non-empty.
  Outcome draw(const OutcomeCounts* counts, std::span<const Outcome> support, std::mt19937_64& rng) const;
};

/// One lazily sampled deterministic model: each (family, context) is drawn on
/// first use and then fixed for the lifetime of the sample.
class SampledOutcomes {
 public:
  SampledOutcomes(ModelPosterior posterior, std::uint64_t seed) : posterior_(posterior), rng_(seed) {}

  /// Observed contexts draw over their outcomes plus `prior`; unobserved ones
  /// draw uniformly over `prior`. Returns nullopt when both are empty.
  std::optional<Outcome> resolve(const FamilyKey& family, const Context& ctx, const OutcomeCounts* counts,
                                 std::span<const Outcome> prior);
  std::size_t memo_size() const { return memo_.size(); }

 private:
  struct MemoKey {
    FamilyKey family;
    Context ctx;
    bool operator==(const MemoKey&) const = default;
  };
  struct MemoHash {
    std::size_t operator()(const MemoKey& k) const noexcept {
      return k.ctx.hash() ^ (static_cast<std::size_t>(k.family.self + 7) * 0x9e3779b97f4a7c15ULL) ^
             (static_cast<std::size_t>(k.family.partner + 11) << 20) ^ static_cast<std::size_t>(k.family.kind);
    }
  };
  ModelPosterior posterior_;
  std::mt19937_64 rng_;
  std::unordered_map<MemoKey, Outcome, MemoHash> memo_;
};

/// Supplies world models for a decision: the modal (maximum-likelihood) model
/// and posterior samples.
class ModelSource {
 public:
  virtual ~ModelSource() = default;
  virtual std::unique_ptr<WorldModel> modal_model() const = 0;
  virtual std::unique_ptr<WorldModel> sample_model(std::uint64_t seed) const = 0;
};

/// Picks an action per the configured exploration regime:
/// MLE and Optimism plan L rollouts in the modal model (Optimism wrapped with r_max and `bonus`),
/// Thompson sampling plans L rollouts in one sample, BAMCP draws one sample per rollout into a shared tree.
PlanResult strategic_explore(const ModelSource& source, const PlanState& root, const PlannerConfig& cfg,
                             const ValueFn& value_fn, std::mt19937_64& rng, const BonusFn& bonus = {},
                             SearchTree* tree_out = nullptr);

}  // namespace soorl
