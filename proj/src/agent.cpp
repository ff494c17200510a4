#include "soorl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace soorl {

double exploration_bonus(long n, double beta) {
  return beta / std::sqrt(static_cast<double>(std::max(n, 1L)));
}

void ReplayBuffer::begin_episode() { starts_.push_back(records_.size()); }

void ReplayBuffer::append(TransitionRecord record) {
  if (starts_.empty()) begin_episode();
  records_.push_back(std::move(record));
}

bool ReplayBuffer::operator==(const ReplayBuffer& o) const {
  if (starts_ != o.starts_ || records_.size() != o.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& a = records_[i];
    const auto& b = o.records_[i];
    if (!(a.before == b.before) || a.action != b.action || !(a.after == b.after) || a.reward != b.reward ||
        a.done != b.done) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

GridValueFunction::GridValueFunction(GridSpec grid, Bounds bounds, std::size_t agent_index, int num_actions)
    : grid_(grid), bounds_(bounds), agent_index_(agent_index), num_actions_(num_actions) {
  const auto cells = static_cast<std::size_t>(num_cells());
  const auto slots = (cells + 1) * static_cast<std::size_t>(num_actions);
  visits_.assign(cells, 0);
  next_counts_.assign(slots, {});
  reward_sums_.assign(slots, 0.0);
  action_counts_.assign(slots, 0);
  values_.assign(cells + 1, 0.0);
}

int GridValueFunction::cell_of(const ObjectState& agent) const {
  auto bucket = [](int v, int lo, int hi, int parts) {
    const long span = std::max(hi - lo, 1);
    const long idx = (static_cast<long>(v) - lo) * parts / span;
    return static_cast<int>(std::clamp<long>(idx, 0, parts - 1));
  };
  const int cx = bucket(agent.x, bounds_.x_min, bounds_.x_max, grid_.n);
  const int cy = bucket(agent.y, bounds_.y_min, bounds_.y_max, grid_.m);
  return cy * grid_.n + cx;
}

int GridValueFunction::cell_of(const FactoredState& s) const {
  const ObjectState& agent = s.objects.at(agent_index_);
  return agent.alive ? cell_of(agent) : sink();
}

void GridValueFunction::tally(const TransitionRecord& r) {
  const int c = cell_of(r.before);
  if (c == sink()) return;
  const int next = r.done ? sink() : cell_of(r.after);
  const std::size_t k = slot(c, r.action);
  ++visits_[static_cast<std::size_t>(c)];
  ++next_counts_[k][next];
  reward_sums_[k] += r.reward;
  ++action_counts_[k];
}

void GridValueFunction::solve(double beta, double gamma, double tol, int max_sweeps) {
  deltas_.clear();
  const int cells = num_cells();
  std::vector<double> next(values_.size(), 0.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double delta = 0.0;
    for (int c = 0; c < cells; ++c) {
      const double b = exploration_bonus(visits_[static_cast<std::size_t>(c)], beta);
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < num_actions_; ++a) {
        const std::size_t k = slot(c, a);
        double q;
        if (action_counts_[k] == 0) {
          q = b + gamma * values_[static_cast<std::size_t>(c)];
        } else {
          const double n = static_cast<double>(action_counts_[k]);
          double expect = 0.0;
          for (const auto& [to, cnt] : next_counts_[k]) {
            expect += static_cast<double>(cnt) / n * values_[static_cast<std::size_t>(to)];
          }
          q = reward_sums_[k] / n + b + gamma * expect;
        }
        best = std::max(best, q);
      }
      next[static_cast<std::size_t>(c)] = best;
      delta = std::max(delta, std::abs(best - values_[static_cast<std::size_t>(c)]));
    }
    next[static_cast<std::size_t>(sink())] = 0.0;
    values_.swap(next);
    deltas_.push_back(delta);
    if (delta < tol) break;
  }
}

double GridValueFunction::value(const FactoredState& s) const {
  if (values_.empty()) return 0.0;
  return value(cell_of(s));
}

std::map<int, double> GridValueFunction::transition(int cell, int action) const {
  std::map<int, double> out;
  const std::size_t k = slot(cell, action);
  if (action_counts_[k] == 0) return out;
  for (const auto& [to, cnt] : next_counts_[k]) {
    out[to] = static_cast<double>(cnt) / static_cast<double>(action_counts_[k]);
  }
  return out;
}

GridValueFunction train_value_function(const ReplayBuffer& buffer, GridSpec grid, Bounds bounds,
                                       std::size_t agent_index, int num_actions, double beta, double gamma) {
  GridValueFunction vf(grid, bounds, agent_index, num_actions);
  for (const auto& r : buffer.records()) vf.tally(r);
  vf.solve(beta, gamma);
  return vf;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<ObjectState> first_partner(const FactoredState& s, std::size_t index) {
  const ObjectState& self = s.objects[index];
  if (!self.alive) return std::nullopt;
  for (std::size_t j = 0; j < s.objects.size(); ++j) {
    if (j != index && s.objects[j].alive && bounding_box_overlap(self, s.objects[j])) return s.objects[j];
  }
  return std::nullopt;
}

std::optional<ObjectState> object_at(const FactoredState& s, std::size_t index) {
  return s.objects[index].alive ? std::optional<ObjectState>(s.objects[index]) : std::nullopt;
}

// Frames oldest-first ending at the decision point; `past` may be longer than needed.
struct Window {
  std::vector<const FactoredState*> frames;
  std::vector<int> actions;
};

Window window_of(const PlanState& ps, int action, std::size_t frames) {
  Window w;
  const std::size_t past = std::min(frames > 0 ? frames - 1 : 0, ps.past.size());
  for (std::size_t k = ps.past.size() - past; k < ps.past.size(); ++k) {
    w.frames.push_back(&ps.past[k]);
    w.actions.push_back(ps.past_actions[k]);
  }
  w.frames.push_back(&ps.current);
  w.actions.push_back(action);
  return w;
}

ObjectRecord standalone_record(const Window& w, std::size_t i) {
  ObjectRecord r;
  for (const FactoredState* f : w.frames) {
    r.history.push_back(f->objects[i]);
    r.partner_history.push_back(first_partner(*f, i));
  }
  r.actions = w.actions;
  return r;
}

ObjectRecord pair_record(const Window& w, std::size_t self, std::size_t partner) {
  ObjectRecord r;
  for (const FactoredState* f : w.frames) {
    r.history.push_back(f->objects[self]);
    r.partner_history.push_back(object_at(*f, partner));
  }
  r.actions = w.actions;
  return r;
}

// Pairs in contact once the step is done. Liveness is taken from `before` so
// that a contact which ends the episode or kills an object still counts.
std::vector<InteractionPair> contacts_after(const FactoredState& before, const FactoredState& after) {
  if (after.objects.size() != before.objects.size()) return detect_interactions(after);
  FactoredState moved = after;
  for (std::size_t i = 0; i < moved.objects.size(); ++i) moved.objects[i].alive = before.objects[i].alive;
  return detect_interactions(moved);
}

Outcome displacement(const ObjectState& before, const ObjectState& after) {
  return Outcome::displacement(after.x - before.x, after.y - before.y, before.alive && !after.alive);
}

}  // namespace

std::pair<std::size_t, std::size_t> SoorlAgent::pair_roles(const FactoredState& s, const InteractionPair& p) {
  const ClassId a = s.objects[p.first].class_id;
  const ClassId b = s.objects[p.second].class_id;
  if (b < a) return {p.second, p.first};
  return {p.first, p.second};
}

/// Composes per-object predictions from the agent's families. With a sampler the
/// outcome of each (family, context) is drawn from the posterior; otherwise the
/// modal outcome is used and unseen contexts are reported as unknown.
class ObjectWorldModel final : public WorldModel {
 public:
  ObjectWorldModel(const SoorlAgent& agent, std::unique_ptr<SampledOutcomes> sampler)
      : agent_(agent), sampler_(std::move(sampler)) {}

  int num_actions() const override { return static_cast<int>(agent_.macros_.size()); }
  std::size_t history_needed() const override { return agent_.history_frames(); }

  ModelStep step(const PlanState& ps, int action) const override {
    const FactoredState& cur = ps.current;
    const MacroAction& macro = agent_.macros_[static_cast<std::size_t>(action)];
    ModelStep out;
    out.next = cur;
    out.next.step = cur.step + 1 + macro.noops;
    const auto pairs = detect_interactions(cur);

    bool simulated = false;
    if (agent_.oracle_ && agent_.cfg_.transitions == TransitionSource::Oracle) {
      if (auto sim = agent_.oracle_->simulate(cur, macro)) {
        out.next = std::move(sim->state);
        out.terminal = sim->done;
        simulated = true;
      } else if (ps.snapshot) {
        auto env = ps.snapshot->clone();
        StepResult r = env->step(macro);
        out.next = std::move(r.state);
        out.terminal = r.done;
        out.snapshot = std::move(env);
        simulated = true;
      }
    }
    if (!simulated) {
      std::vector<long> partner_of(cur.objects.size(), -1);
      for (const auto& p : pairs) {
        const auto [s, q] = SoorlAgent::pair_roles(cur, p);
        if (partner_of[s] < 0) partner_of[s] = static_cast<long>(q);
      }
      for (std::size_t i = 0; i < cur.objects.size(); ++i) {
        if (!cur.objects[i].alive) continue;
        std::optional<Outcome> o;
        if (partner_of[i] >= 0) {
          const auto q = static_cast<std::size_t>(partner_of[i]);
          o = resolve({FamilyKind::Transition, cur.objects[i].class_id, cur.objects[q].class_id}, ps, action, i, q,
                      out.known);
        } else {
          o = resolve({FamilyKind::Transition, cur.objects[i].class_id}, ps, action, i, std::nullopt, out.known);
        }
        if (!o) continue;
        ObjectState& obj = out.next.objects[i];
        obj.x += o->dx;
        obj.y += o->dy;
        if (o->died) obj.alive = false;
      }
      out.terminal = !out.next.objects[agent_.agent_index_].alive;
    }

    const auto touched = contacts_after(cur, out.next);
    for (const auto& p : touched) {
      const auto [s, q] = SoorlAgent::pair_roles(cur, p);
      if (!agent_.pair_seen(cur.objects[s].class_id, cur.objects[q].class_id)) out.novel = true;
    }
    if (!touched.empty()) {
      int best = 0;
      for (const auto& p : touched) {
        const auto [s, q] = SoorlAgent::pair_roles(cur, p);
        const auto r = resolve({FamilyKind::Reward, cur.objects[s].class_id, cur.objects[q].class_id}, ps, action, s,
                               q, out.known);
        if (r && std::abs(r->reward) > std::abs(best)) best = r->reward;
      }
      out.reward = best;
    } else {
      const auto r = resolve({FamilyKind::Reward, agent_.agent_class_}, ps, action, agent_.agent_index_,
                             std::nullopt, out.known);
      if (r) out.reward = r->reward;
    }
    return out;
  }

 private:
  // `partner` engaged: pairwise featurization against that object; otherwise the
  // first interacting partner per frame.
  std::optional<Outcome> resolve(const FamilyKey& key, const PlanState& ps, int action, std::size_t self,
                                 std::optional<std::size_t> partner, bool& known) const {
    const bool reward = key.kind == FamilyKind::Reward;
    auto it = agent_.families_.find(key);
    const ModelFamily* fam = it == agent_.families_.end() ? nullptr : &it->second;
    if (fam && ps.past.size() + 1 >= static_cast<std::size_t>(fam->current_t())) {
      const Window w = window_of(ps, action, static_cast<std::size_t>(fam->current_t()));
      const ObjectRecord rec = partner ? pair_record(w, self, *partner) : standalone_record(w, self);
      const Context ctx = featurize(rec, kFeatureSets[static_cast<std::size_t>(fam->selected())],
                                    fam->current_t(), fam->null_uses_action());
      const auto hit = fam->selected_model().predict(ctx);
      if (!hit) known = false;
      if (!sampler_) {
        if (hit) return hit->outcome;
        return std::nullopt;
      }
      const std::vector<Outcome>& prior = reward ? agent_.declared_rewards_ : fam->observed_outcomes();
      return sampler_->resolve(key, ctx, hit ? hit->support : nullptr, prior);
    }
    known = false;
    if (sampler_ && reward && !agent_.declared_rewards_.empty()) {
      // No family yet: draw from the declared rewards under a context made of the action alone.
      const Context ctx({}, {action});
      return sampler_->resolve(key, ctx, nullptr, agent_.declared_rewards_);
    }
    return std::nullopt;
  }

  const SoorlAgent& agent_;
  std::unique_ptr<SampledOutcomes> sampler_;
};

namespace {

class AgentModelSource final : public ModelSource {
 public:
  explicit AgentModelSource(const SoorlAgent& agent) : agent_(agent) {}
  std::unique_ptr<WorldModel> modal_model() const override { return agent_.modal_model(); }
  std::unique_ptr<WorldModel> sample_model(std::uint64_t seed) const override { return agent_.sample_model(seed); }

 private:
  const SoorlAgent& agent_;
};

}  // namespace

SoorlAgent::SoorlAgent(const Environment& env, AgentConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      oracle_(env.clone()),
      agent_index_(env.agent_index()),
      agent_class_(env.agent_class()),
      bounds_(env.bounds()),
      rng_(seed) {
  validate(cfg_.planner);
  macros_ = cfg_.macros;
  if (macros_.empty()) {
    for (int a : env.atomic_actions()) macros_.push_back({a, 0});
  }
  for (int r : env.declared_rewards()) declared_rewards_.push_back(Outcome::reward_of(r));
  std::sort(declared_rewards_.begin(), declared_rewards_.end());
  value_fn_ = GridValueFunction(cfg_.grid, bounds_, agent_index_, static_cast<int>(macros_.size()));
  value_fn_.solve(cfg_.beta, cfg_.planner.gamma);
  live_visits_.assign(static_cast<std::size_t>(cfg_.grid.n * cfg_.grid.m), 0);
}

ModelFamily& SoorlAgent::family(const FamilyKey& key) {
  auto it = families_.find(key);
  if (it != families_.end()) return it->second;
  FamilyConfig fc = cfg_.family;
  if (auto p = cfg_.pinned.find(key); p != cfg_.pinned.end()) {
    fc.pinned_feature_set = p->second;
  } else if (key.kind == FamilyKind::Reward) {
    fc.pinned_feature_set = cfg_.reward_feature_set;
  }
  return families_.emplace(key, ModelFamily(key, fc)).first->second;
}

void SoorlAgent::observe(const FamilyKey& key, const ObjectRecord& record) {
  try {
    family(key).observe(record);
  } catch (const HistoryTooShort&) {
    ++skipped_;
  }
}

void SoorlAgent::update_models(const PlanState& before, int action, const FactoredState& after, int reward) {
  const FactoredState& cur = before.current;
  const Window w = window_of(before, action, before.past.size() + 1);
  const auto pairs = detect_interactions(cur);
  const auto touched = contacts_after(cur, after);
  for (std::size_t i = 0; i < cur.objects.size(); ++i) {
    if (!cur.objects[i].alive) continue;
    ObjectRecord rec = standalone_record(w, i);
    rec.outcome = displacement(cur.objects[i], after.objects[i]);
    observe({FamilyKind::Transition, cur.objects[i].class_id}, rec);
    if (i == agent_index_ && touched.empty()) {
      rec.outcome = Outcome::reward_of(reward);
      observe({FamilyKind::Reward, agent_class_}, rec);
    }
  }
  for (const auto& p : pairs) {
    const auto [s, q] = pair_roles(cur, p);
    ObjectRecord rec = pair_record(w, s, q);
    rec.outcome = displacement(cur.objects[s], after.objects[s]);
    observe({FamilyKind::Transition, cur.objects[s].class_id, cur.objects[q].class_id}, rec);
  }
  for (const auto& p : touched) {
    const auto [s, q] = pair_roles(cur, p);
    const ClassId cs = cur.objects[s].class_id, cq = cur.objects[q].class_id;
    ObjectRecord rec = pair_record(w, s, q);
    rec.outcome = Outcome::reward_of(reward);
    observe({FamilyKind::Reward, cs, cq}, rec);
    seen_pairs_.insert({cs, cq});
  }
  const int c = value_fn_.cell_of(cur);
  if (c != value_fn_.sink()) ++live_visits_[static_cast<std::size_t>(c)];
}

bool SoorlAgent::pair_seen(ClassId a, ClassId b) const {
  if (b < a) std::swap(a, b);
  return seen_pairs_.count({a, b}) > 0;
}

int SoorlAgent::apply_backoffs() {
  int grown = 0;
  for (auto& [key, fam] : families_) {
    fam.select_model();
    if (fam.needs_backoff() && fam.can_backoff()) {
      fam.backoff_history();
      fam.select_model();
      ++grown;
    }
  }
  return grown;
}

void SoorlAgent::train_value_function() {
  value_fn_ = soorl::train_value_function(buffer_, cfg_.grid, bounds_, agent_index_,
                                          static_cast<int>(macros_.size()), cfg_.beta, cfg_.planner.gamma);
  for (int c = 0; c < value_fn_.num_cells(); ++c) live_visits_[static_cast<std::size_t>(c)] = value_fn_.visits(c);
}

std::unique_ptr<WorldModel> SoorlAgent::modal_model() const {
  return std::make_unique<ObjectWorldModel>(*this, nullptr);
}

std::unique_ptr<WorldModel> SoorlAgent::sample_model(std::uint64_t seed) const {
  return std::make_unique<ObjectWorldModel>(*this, std::make_unique<SampledOutcomes>(ModelPosterior{cfg_.alpha}, seed));
}

double SoorlAgent::bonus(const FactoredState& s) const {
  const int c = value_fn_.cell_of(s);
  if (c == value_fn_.sink()) return 0.0;
  return exploration_bonus(live_visits_[static_cast<std::size_t>(c)], cfg_.beta);
}

long SoorlAgent::live_visits(int cell) const { return live_visits_[static_cast<std::size_t>(cell)]; }

std::size_t SoorlAgent::history_frames() const {
  int t = 1;
  for (const auto& [key, fam] : families_) t = std::max(t, fam.current_t());
  return static_cast<std::size_t>(t - 1);
}

std::string SoorlAgent::selected_summary() const {
  std::string out;
  for (const auto& [key, fam] : families_) {
    if (!out.empty()) out += ' ';
    out += key.kind == FamilyKind::Transition ? 'T' : 'R';
    out += std::to_string(key.self);
    if (key.pairwise()) out += "-" + std::to_string(key.partner);
    out += '=';
    const auto names = kFeatureSets[static_cast<std::size_t>(fam.selected())].names();
    if (names.empty()) out += "null";
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "+" : "") + names[i];
    out += "@t" + std::to_string(fam.current_t());
  }
  return out;
}

nlohmann::json SoorlAgent::models_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, fam] : families_) out.push_back(fam.to_json());
  return out;
}

EpisodeStats SoorlAgent::run_episode(Environment& env, std::uint64_t env_seed) {
  EpisodeStats stats;
  stats.episode = ++episodes_;
  train_value_function();
  const std::size_t keep = static_cast<std::size_t>(std::max(cfg_.family.max_t, 1) - 1);
  PlanState ps{env.reset(env_seed), {}, {}, nullptr};
  buffer_.begin_episode();
  const AgentModelSource source(*this);
  const ValueFn value_fn = [this](const FactoredState& s) { return value_fn_.value(s); };
  const BonusFn bonus_fn = [this](const FactoredState& s) { return bonus(s); };
  const long skipped_before = skipped_;
  while (!env.done()) {
    for (auto& [key, fam] : families_) fam.select_model();
    if (cfg_.transitions == TransitionSource::Oracle) ps.snapshot = env.clone();
    const PlanResult plan = strategic_explore(source, ps, cfg_.planner, value_fn, rng_, bonus_fn);
    const int a = plan.best_action;
    StepResult r = env.step(macros_[static_cast<std::size_t>(a)]);
    update_models(ps, a, r.state, r.reward);
    buffer_.append({ps.current, a, r.state, r.reward, r.done});
    stats.episode_return += r.reward;
    stats.steps += r.primitive_steps;
    ++stats.decisions;
    ps = ps.advanced(std::move(r.state), a, keep);
  }
  stats.reached_goal = env.goal_reached();
  stats.model_backoffs = apply_backoffs();
  stats.skipped_records = skipped_ - skipped_before;
  stats.selected_feature_sets = selected_summary();
  return stats;
}

}  // namespace soorl
