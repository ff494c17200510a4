#include "soorl/models.hpp"

#include <algorithm>
#include <cmath>

namespace soorl {

std::vector<std::string> FeatureSet::names() const {
  std::vector<std::string> out;
  if (size) out.emplace_back("size");
  if (location) out.emplace_back("location");
  if (intersection) out.emplace_back("intersection");
  return out;
}

int feature_set_index(const FeatureSet& fs) {
  for (int i = 0; i < kNumFeatureSets; ++i) {
    if (kFeatureSets[static_cast<std::size_t>(i)] == fs) return i;
  }
  return 0;  // unreachable: the table enumerates all eight
}

Context::Context(std::vector<std::int32_t> features, std::vector<std::int32_t> actions)
    : n_features_(static_cast<int>(features.size())) {
  words_ = std::move(features);
  words_.insert(words_.end(), actions.begin(), actions.end());
  hash_ = hash_ints(words_.data(), words_.size(), static_cast<std::size_t>(n_features_));
}

Context Context::from_words(std::vector<std::int32_t> words, int n_features) {
  Context c;
  c.words_ = std::move(words);
  c.n_features_ = n_features;
  c.hash_ = hash_ints(c.words_.data(), c.words_.size(), static_cast<std::size_t>(n_features));
  return c;
}

Context featurize(std::span<const ObjectState> object_history,
                  std::span<const std::optional<ObjectState>> partner_history,
                  std::span<const int> actions, const FeatureSet& fs, int t,
                  bool null_uses_action) {
  const auto need = static_cast<std::size_t>(t);
  if (t < 1 || object_history.size() < need || actions.size() < need) {
    throw HistoryTooShort("need " + std::to_string(t) + " steps of history, have " +
                          std::to_string(std::min(object_history.size(), actions.size())));
  }
  const int per_step = 2 * (static_cast<int>(fs.size) + static_cast<int>(fs.location) +
                            static_cast<int>(fs.intersection));
  const bool with_actions = null_uses_action || !fs.is_null();
  std::vector<std::int32_t> words;
  words.reserve(need * static_cast<std::size_t>(per_step) + (with_actions ? need : 0));

  const std::size_t obj_start = object_history.size() - need;
  // Partner history is aligned to the end of the object history; missing entries are NONE.
  const std::ptrdiff_t partner_shift =
      static_cast<std::ptrdiff_t>(partner_history.size()) -
      static_cast<std::ptrdiff_t>(object_history.size());
  for (std::size_t k = 0; k < need; ++k) {
    const ObjectState& o = object_history[obj_start + k];
    if (fs.size) words.insert(words.end(), {o.w, o.h});
    if (fs.location) words.insert(words.end(), {o.x, o.y});
    if (fs.intersection) {
      const std::ptrdiff_t pi = static_cast<std::ptrdiff_t>(obj_start + k) + partner_shift;
      const std::optional<ObjectState>* p =
          (pi >= 0 && pi < static_cast<std::ptrdiff_t>(partner_history.size()))
              ? &partner_history[static_cast<std::size_t>(pi)]
              : nullptr;
      if (p && p->has_value()) {
        words.insert(words.end(), {(*p)->x - o.x, (*p)->y - o.y});
      } else {
        words.insert(words.end(), {kNoPartner, kNoPartner});
      }
    }
  }
  const int n_features = static_cast<int>(words.size());
  if (with_actions) {
    words.insert(words.end(), actions.end() - static_cast<std::ptrdiff_t>(need), actions.end());
  }
  return Context::from_words(std::move(words), n_features);
}

Context featurize(const ObjectRecord& record, const FeatureSet& fs, int t, bool null_uses_action) {
  return featurize(record.history, record.partner_history, record.actions, fs, t,
                   null_uses_action);
}

void CountModel::add(const Context& ctx, const Outcome& outcome, long count) {
  auto& counts = table_[ctx];
  auto it = std::lower_bound(counts.begin(), counts.end(), outcome,
                             [](const auto& e, const Outcome& o) { return e.first < o; });
  if (it != counts.end() && it->first == outcome) {
    it->second += count;
  } else {
    counts.insert(it, {outcome, count});
  }
  total_ += count;
}

std::optional<Known> CountModel::predict(const Context& ctx) const {
  auto it = table_.find(ctx);
  if (it == table_.end()) return std::nullopt;
  const OutcomeCounts& counts = it->second;
  // counts is sorted, so the first maximum is the smallest modal outcome.
  auto best = counts.begin();
  for (auto c = counts.begin(); c != counts.end(); ++c) {
    if (c->second > best->second) best = c;
  }
  return Known{best->first, &counts};
}

double empirical_entropy(const CountModel& model) {
  if (model.total_observations() == 0) return 0.0;
  double sum = 0.0;
  for (const auto& [ctx, counts] : model.table()) {
    if (counts.size() < 2) continue;
    long n_ctx = 0;
    for (const auto& [o, n] : counts) n_ctx += n;
    for (const auto& [o, n] : counts) {
      sum -= static_cast<double>(n) * std::log(static_cast<double>(n) / static_cast<double>(n_ctx));
    }
  }
  return sum / static_cast<double>(model.total_observations());
}

int next_power_of_two_above(int t) {
  int p = 1;
  while (p <= t) p *= 2;
  return p;
}

ModelFamily::ModelFamily(FamilyKey key, FamilyConfig cfg) : key_(key), cfg_(cfg), t_(cfg.initial_t) {
  if (t_ < 1) t_ = 1;
  rebuild();
  if (cfg_.pinned_feature_set) selected_ = *cfg_.pinned_feature_set;
}

void ModelFamily::note_outcome(const Outcome& o) {
  auto it = std::lower_bound(outcomes_.begin(), outcomes_.end(), o);
  if (it == outcomes_.end() || !(*it == o)) outcomes_.insert(it, o);
}

void ModelFamily::observe(const ObjectRecord& record) {
  std::array<Context, kNumFeatureSets> contexts;
  for (int k = 0; k < kNumFeatureSets; ++k) {
    contexts[static_cast<std::size_t>(k)] =
        featurize(record, kFeatureSets[static_cast<std::size_t>(k)], t_, cfg_.null_uses_action);
  }
  for (int k = 0; k < kNumFeatureSets; ++k) {
    models_[static_cast<std::size_t>(k)].add(contexts[static_cast<std::size_t>(k)], record.outcome);
  }
  records_.push_back(record);
  note_outcome(record.outcome);
  dirty_ = true;
}

int ModelFamily::select_model() {
  if (cfg_.pinned_feature_set) {
    selected_ = *cfg_.pinned_feature_set;
    needs_backoff_ = false;
    return selected_;
  }
  if (!dirty_) return selected_;
  dirty_ = false;
  for (int k = 0; k < kNumFeatureSets; ++k) {
    if (empirical_entropy(model(k)) <= cfg_.epsilon_ent) {
      selected_ = k;
      needs_backoff_ = false;
      return selected_;
    }
  }
  selected_ = kNumFeatureSets - 1;
  needs_backoff_ = true;
  return selected_;
}

void ModelFamily::rebuild() {
  for (int k = 0; k < kNumFeatureSets; ++k) {
    models_[static_cast<std::size_t>(k)] = CountModel(t_, kFeatureSets[static_cast<std::size_t>(k)]);
  }
  for (const auto& r : records_) {
    // Records from episode starts that are shorter than the new window are skipped.
    if (r.history.size() < static_cast<std::size_t>(t_) ||
        r.actions.size() < static_cast<std::size_t>(t_)) {
      continue;
    }
    for (int k = 0; k < kNumFeatureSets; ++k) {
      models_[static_cast<std::size_t>(k)].add(
          featurize(r, kFeatureSets[static_cast<std::size_t>(k)], t_, cfg_.null_uses_action),
          r.outcome);
    }
  }
  dirty_ = true;
}

void ModelFamily::backoff_history() {
  t_ = next_power_of_two_above(t_);
  needs_backoff_ = false;
  rebuild();
}

nlohmann::json ModelFamily::to_json() const {
  nlohmann::json models = nlohmann::json::array();
  for (int k = 0; k < kNumFeatureSets; ++k) {
    models.push_back({{"features", kFeatureSets[static_cast<std::size_t>(k)].names()},
                      {"entropy", empirical_entropy(model(k))},
                      {"contexts", model(k).num_contexts()}});
  }
  nlohmann::json cls = key_.pairwise() ? nlohmann::json::array({key_.self, key_.partner})
                                       : nlohmann::json(key_.self);
  return {{"class", cls},
          {"kind", key_.kind == FamilyKind::Transition ? "transition" : "reward"},
          {"t", t_},
          {"epsilon", cfg_.epsilon_ent},
          {"selected", selected_},
          {"models", models}};
}

}  // namespace soorl
