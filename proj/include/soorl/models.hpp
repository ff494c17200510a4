#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "soorl/oomdp.hpp"

namespace soorl {

struct HistoryTooShort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Which object attributes a count model conditions on.
struct FeatureSet {
  bool size = false;
  bool location = false;
  bool intersection = false;

  bool operator==(const FeatureSet&) const = default;
  bool is_null() const { return !size && !location && !intersection; }
  bool subset_of(const FeatureSet& o) const {
    return (!size || o.size) && (!location || o.location) && (!intersection || o.intersection);
  }
  std::vector<std::string> names() const;
};

inline constexpr int kNumFeatureSets = 8;

// null < singles < pairs < all; within a tier size < location < intersection.
inline constexpr std::array<FeatureSet, kNumFeatureSets> kFeatureSets{{
    {false, false, false},
    {true, false, false},
    {false, true, false},
    {false, false, true},
    {true, true, false},
    {true, false, true},
    {false, true, true},
    {true, true, true},
}};

/// Position of a feature set in complexity order.
int feature_set_index(const FeatureSet& fs);

/// Marker for "no interacting partner at this step".
inline constexpr std::int32_t kNoPartner = INT32_MIN;

/// Flattened model input: per-step features (oldest first) followed by action ids.
class Context {
 public:
  Context() = default;
  Context(std::vector<std::int32_t> features, std::vector<std::int32_t> actions);
  /// `words` holds n_features feature values followed by action ids.
  static Context from_words(std::vector<std::int32_t> words, int n_features);

  std::span<const std::int32_t> feature_values() const {
    return {words_.data(), static_cast<std::size_t>(n_features_)};
  }
  std::span<const std::int32_t> action_history() const {
    return {words_.data() + n_features_, words_.size() - static_cast<std::size_t>(n_features_)};
  }
  std::size_t size() const { return words_.size(); }
  std::size_t hash() const { return hash_; }
  bool operator==(const Context& o) const { return n_features_ == o.n_features_ && words_ == o.words_; }

 private:
  std::vector<std::int32_t> words_;
  int n_features_ = 0;
  std::size_t hash_ = 0;
};

struct ContextHash {
  std::size_t operator()(const Context& c) const noexcept { return c.hash(); }
};

enum class OutcomeKind : std::uint8_t { Displacement = 0, Reward = 1 };

/// Model output. Displacement uses (dx, dy, died); Reward uses reward.
struct Outcome {
  OutcomeKind kind = OutcomeKind::Displacement;
  int dx = 0;
  int dy = 0;
  bool died = false;
  int reward = 0;

  static Outcome displacement(int dx, int dy, bool died = false) {
    return {OutcomeKind::Displacement, dx, dy, died, 0};
  }
  static Outcome reward_of(int r) { return {OutcomeKind::Reward, 0, 0, false, r}; }

  auto operator<=>(const Outcome&) const = default;
};

/// Sorted (outcome, count) list for one context.
using OutcomeCounts = std::vector<std::pair<Outcome, long>>;

struct Known {
  Outcome outcome;
  const OutcomeCounts* support = nullptr;
};

/// One datum for a family: the object's history ending at o_i, the aligned
/// partner history, the aligned macro-action ids ending at a_i, and the outcome.
struct ObjectRecord {
  std::vector<ObjectState> history;
  std::vector<std::optional<ObjectState>> partner_history;
  std::vector<int> actions;
  Outcome outcome;
};

/// Builds the Context for the last `t` steps of aligned histories.
/// Throws HistoryTooShort when fewer than t steps are available.
Context featurize(std::span<const ObjectState> object_history,
                  std::span<const std::optional<ObjectState>> partner_history,
                  std::span<const int> actions, const FeatureSet& fs, int t,
                  bool null_uses_action = true);

Context featurize(const ObjectRecord& record, const FeatureSet& fs, int t,
                  bool null_uses_action = true);

/// Count table from context to outcome counts.
class CountModel {
 public:
  CountModel() = default;
  CountModel(int history_t, FeatureSet features) : history_t_(history_t), features_(features) {}

  void add(const Context& ctx, const Outcome& outcome, long count = 1);
  std::optional<Known> predict(const Context& ctx) const;

  int history_t() const { return history_t_; }
  const FeatureSet& features() const { return features_; }
  long total_observations() const { return total_; }
  std::size_t num_contexts() const { return table_.size(); }
  const std::unordered_map<Context, OutcomeCounts, ContextHash>& table() const { return table_; }
  bool operator==(const CountModel& o) const {
    return history_t_ == o.history_t_ && features_ == o.features_ && total_ == o.total_ &&
           table_ == o.table_;
  }

 private:
  int history_t_ = 1;
  FeatureSet features_;
  std::unordered_map<Context, OutcomeCounts, ContextHash> table_;
  long total_ = 0;
};

/// Count-weighted mean negative log conditional likelihood in nats; 0 for an empty model.
double empirical_entropy(const CountModel& model);

enum class FamilyKind : std::uint8_t { Transition = 0, Reward = 1 };

/// Standalone families have partner == kStandalone.
struct FamilyKey {
  static constexpr ClassId kStandalone = -1;
  FamilyKind kind = FamilyKind::Transition;
  ClassId self = 0;
  ClassId partner = kStandalone;

  auto operator<=>(const FamilyKey&) const = default;
  bool pairwise() const { return partner != kStandalone; }
};

struct FamilyConfig {
  double epsilon_ent = 0.05;
  int initial_t = 1;
  int max_t = 8;
  bool null_uses_action = true;
  // When set, the family always uses this feature set and never backs off.
  std::optional<int> pinned_feature_set;
};

/// The eight count models over one data stream plus entropy-based selection.
class ModelFamily {
 public:
  explicit ModelFamily(FamilyKey key = {}, FamilyConfig cfg = {});

  /// Adds one datum to all eight models. Throws HistoryTooShort (and leaves
  /// the family unchanged) when the record is shorter than current_t.
  void observe(const ObjectRecord& record);

  /// Simplest model with entropy <= epsilon, else the most complex with the back-off flag set.
  int select_model();

  /// Grows t to the next power of two and rebuilds every table from retained records.
  void backoff_history();

  const FamilyKey& key() const { return key_; }
  const FamilyConfig& config() const { return cfg_; }
  int current_t() const { return t_; }
  int selected() const { return selected_; }
  bool needs_backoff() const { return needs_backoff_; }
  bool can_backoff() const { return !cfg_.pinned_feature_set && t_ < cfg_.max_t; }
  const CountModel& model(int index) const { return models_[static_cast<std::size_t>(index)]; }
  const CountModel& selected_model() const { return model(selected_); }
  const std::vector<ObjectRecord>& records() const { return records_; }
  long total_observations() const { return models_[0].total_observations(); }
  /// Outcomes seen anywhere in this family, sorted.
  const std::vector<Outcome>& observed_outcomes() const { return outcomes_; }
  bool null_uses_action() const { return cfg_.null_uses_action; }

  nlohmann::json to_json() const;

 private:
  void rebuild();
  void note_outcome(const Outcome& o);

  FamilyKey key_;
  FamilyConfig cfg_;
  int t_ = 1;
  std::array<CountModel, kNumFeatureSets> models_;
  int selected_ = 0;
  bool needs_backoff_ = false;
  bool dirty_ = true;
  std::vector<ObjectRecord> records_;
  std::vector<Outcome> outcomes_;
};

/// Smallest power of two strictly greater than t.
int next_power_of_two_above(int t);

}  // namespace soorl
