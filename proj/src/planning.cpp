#include "soorl/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace soorl {

std::string to_string(PlannerMode mode) {
  switch (mode) {
    case PlannerMode::MLE: return "mle";
    case PlannerMode::Optimism: return "optimism";
    case PlannerMode::ThompsonSampling: return "ts";
    case PlannerMode::BAMCP: return "bamcp";
  }
  return "unknown";
}

PlannerMode parse_mode(const std::string& name) {
  if (name == "mle") return PlannerMode::MLE;
  if (name == "optimism") return PlannerMode::Optimism;
  if (name == "ts") return PlannerMode::ThompsonSampling;
  if (name == "bamcp") return PlannerMode::BAMCP;
  throw std::invalid_argument("unknown planner mode '" + name + "'");
}

void validate(const PlannerConfig& cfg) {
  if (cfg.depth < 1) throw std::invalid_argument("depth must be positive");
  if (cfg.rollouts < 1) throw std::invalid_argument("rollouts must be positive");
  if (cfg.models < 1) throw std::invalid_argument("models must be positive");
  if (!(cfg.ucb_c > 0.0)) throw std::invalid_argument("ucb_c must be positive");
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
}

SearchShape search_shape(const PlannerConfig& cfg) {
  if (cfg.mode == PlannerMode::BAMCP) return {cfg.models, 1};
  return {1, cfg.rollouts};
}

PlanState PlanState::advanced(FactoredState next, int action, std::size_t keep) const {
  PlanState out;
  if (keep > 0) {
    const std::size_t from = past.size() + 1 > keep ? past.size() + 1 - keep : 0;
    out.past.assign(past.begin() + static_cast<std::ptrdiff_t>(from), past.end());
    out.past_actions.assign(past_actions.begin() + static_cast<std::ptrdiff_t>(from), past_actions.end());
    out.past.push_back(current);
    out.past_actions.push_back(action);
  }
  out.current = std::move(next);
  return out;
}

// ---------------------------------------------------------------------------

ModelStep OptimisticModel::step(const PlanState& state, int action) const {
  ModelStep s = base_.step(state, action);
  if (!s.known || s.novel) {
    s.reward = r_max_;
    s.terminal = true;
    return s;
  }
  if (bonus_) s.reward += bonus_(s.next);
  return s;
}

std::unique_ptr<WorldModel> make_optimistic(const WorldModel& base, double r_max, BonusFn bonus) {
  return std::make_unique<OptimisticModel>(base, r_max, std::move(bonus));
}

TabularModel::TabularModel(int num_states, int num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      table_(static_cast<std::size_t>(num_states * num_actions)) {
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) set(s, a, s, 0.0);
  }
}

void TabularModel::set(int s, int a, int next, double reward, bool terminal) {
  table_[static_cast<std::size_t>(s * num_actions_ + a)] = {next, reward, terminal, true};
}

void TabularModel::set_unknown(int s, int a) {
  table_[static_cast<std::size_t>(s * num_actions_ + a)].known = false;
}

FactoredState TabularModel::encode(int s) { return {{{0, s, 0, 1, 1, true}}, 0}; }

int TabularModel::decode(const FactoredState& s) { return s.objects.front().x; }

ModelStep TabularModel::step(const PlanState& state, int action) const {
  const Entry& e = entry(decode(state.current), action);
  ModelStep out;
  out.next = encode(e.next);
  out.next.step = state.current.step + 1;
  out.reward = e.reward;
  out.terminal = e.terminal;
  out.known = e.known;
  return out;
}

std::vector<double> finite_horizon_q(const TabularModel& m, int s, int horizon, double gamma) {
  const int n = m.num_states(), na = m.num_actions();
  std::vector<double> v(static_cast<std::size_t>(n), 0.0), next_v(v.size());
  for (int h = 1; h < horizon; ++h) {
    for (int st = 0; st < n; ++st) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < na; ++a) {
        const auto& e = m.entry(st, a);
        best = std::max(best, e.reward + (e.terminal ? 0.0 : gamma * v[static_cast<std::size_t>(e.next)]));
      }
      next_v[static_cast<std::size_t>(st)] = best;
    }
    v.swap(next_v);
  }
  std::vector<double> q(static_cast<std::size_t>(na));
  for (int a = 0; a < na; ++a) {
    const auto& e = m.entry(s, a);
    q[static_cast<std::size_t>(a)] = e.reward + (e.terminal ? 0.0 : gamma * v[static_cast<std::size_t>(e.next)]);
  }
  return q;
}

// ---------------------------------------------------------------------------

SearchNode& SearchTree::node(int depth, const FactoredState& s, int num_actions) {
  auto [it, inserted] = nodes_.try_emplace(Key{depth, state_key(s)});
  if (inserted) it->second.actions.resize(static_cast<std::size_t>(num_actions));
  return it->second;
}

const SearchNode* SearchTree::find(int depth, const FactoredState& s) const {
  auto it = nodes_.find(Key{depth, state_key(s)});
  return it == nodes_.end() ? nullptr : &it->second;
}

int select_ucb(const SearchNode& node, double c) {
  for (std::size_t a = 0; a < node.actions.size(); ++a) {
    if (node.actions[a].visits == 0) return static_cast<int>(a);
  }
  const double log_n = std::log(static_cast<double>(node.visits));
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < node.actions.size(); ++a) {
    const auto& st = node.actions[a];
    const double score = st.q + c * std::sqrt(log_n / static_cast<double>(st.visits));
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(a);
    }
  }
  return best;
}

int best_root_action(const SearchNode& root) {
  int best = -1;
  for (std::size_t a = 0; a < root.actions.size(); ++a) {
    if (root.actions[a].visits == 0) continue;
    if (best < 0 || root.actions[a].q > root.actions[static_cast<std::size_t>(best)].q) best = static_cast<int>(a);
  }
  return best < 0 ? 0 : best;
}

void uct_search(const WorldModel& model, const PlanState& root, const PlannerConfig& cfg, int rollouts,
                const ValueFn& value_fn, SearchTree& tree, std::vector<RolloutTrace>* trace) {
  const int na = model.num_actions();
  const std::size_t keep = model.history_needed();
  struct Visit {
    SearchNode* node;
    int action;
    double reward;
  };
  std::vector<Visit> path;
  path.reserve(static_cast<std::size_t>(cfg.depth));
  for (int l = 0; l < rollouts; ++l) {
    path.clear();
    RolloutTrace rt;
    PlanState s = root;
    double leaf = 0.0;
    for (int i = 0; i <= cfg.depth; ++i) {
      if (i == cfg.depth) {
        if (cfg.leaf_value && value_fn) leaf = value_fn(s.current);
        break;
      }
      SearchNode& node = tree.node(i, s.current, na);
      const int a = select_ucb(node, cfg.ucb_c);
      ModelStep step = model.step(s, a);
      path.push_back({&node, a, step.reward});
      if (trace) {
        rt.states.push_back(state_key(s.current));
        rt.actions.push_back(a);
        rt.rewards.push_back(step.reward);
      }
      if (step.terminal) break;
      s = s.advanced(std::move(step.next), a, keep);
      s.snapshot = std::move(step.snapshot);
    }
    double g = leaf;
    if (trace) rt.returns.assign(path.size(), 0.0);
    for (std::size_t k = path.size(); k-- > 0;) {
      g = path[k].reward + cfg.gamma * g;
      SearchNode& node = *path[k].node;
      ActionStats& st = node.actions[static_cast<std::size_t>(path[k].action)];
      ++node.visits;
      ++st.visits;
      st.q += (g - st.q) / static_cast<double>(st.visits);
      if (trace) rt.returns[k] = g;
    }
    if (trace) trace->push_back(std::move(rt));
  }
}

PlanResult root_result(const SearchTree& tree, const PlanState& root, int num_actions) {
  PlanResult r;
  r.q.assign(static_cast<std::size_t>(num_actions), 0.0);
  r.visits.assign(static_cast<std::size_t>(num_actions), 0);
  r.tree_nodes = tree.node_count();
  if (const SearchNode* node = tree.find(0, root.current)) {
    for (std::size_t a = 0; a < node->actions.size(); ++a) {
      r.q[a] = node->actions[a].q;
      r.visits[a] = node->actions[a].visits;
    }
    r.best_action = best_root_action(*node);
  }
  return r;
}

PlanResult uct_plan(const WorldModel& model, const PlanState& root, const PlannerConfig& cfg,
                    const ValueFn& value_fn, std::vector<RolloutTrace>* trace) {
  SearchTree tree;
  uct_search(model, root, cfg, cfg.rollouts, value_fn, tree, trace);
  return root_result(tree, root, model.num_actions());
}

// ---------------------------------------------------------------------------

Outcome ModelPosterior::draw(const OutcomeCounts* counts, std::span<const Outcome> support,
                             std::mt19937_64& rng) const {
  std::vector<double> weights(support.size());
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    double shape = alpha;
    if (counts) {
      auto it = std::lower_bound(counts->begin(), counts->end(), support[i],
                                 [](const auto& e, const Outcome& o) { return e.first < o; });
      if (it != counts->end() && it->first == support[i]) shape += static_cast<double>(it->second);
    }
    std::gamma_distribution<double> gamma(shape, 1.0);
    weights[i] = gamma(rng);
    total += weights[i];
  }
  if (!(total > 0.0)) return support[std::uniform_int_distribution<std::size_t>(0, support.size() - 1)(rng)];
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (u < weights[i]) return support[i];
    u -= weights[i];
  }
  return support.back();
}

std::optional<Outcome> SampledOutcomes::resolve(const FamilyKey& family, const Context& ctx,
                                                const OutcomeCounts* counts, std::span<const Outcome> prior) {
  MemoKey key{family, ctx};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  std::vector<Outcome> support(prior.begin(), prior.end());
  if (counts) {
    for (const auto& [o, n] : *counts) support.push_back(o);
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  if (support.empty()) return std::nullopt;
  Outcome o;
  if (counts && !counts->empty()) {
    o = posterior_.draw(counts, support, rng_);
  } else {
    o = support[std::uniform_int_distribution<std::size_t>(0, support.size() - 1)(rng_)];
  }
  memo_.emplace(std::move(key), o);
  return o;
}

PlanResult strategic_explore(const ModelSource& source, const PlanState& root, const PlannerConfig& cfg,
                             const ValueFn& value_fn, std::mt19937_64& rng, const BonusFn& bonus,
                             SearchTree* tree_out) {
  const SearchShape shape = search_shape(cfg);
  SearchTree tree;
  int num_actions = 0;
  switch (cfg.mode) {
    case PlannerMode::MLE: {
      auto model = source.modal_model();
      num_actions = model->num_actions();
      uct_search(*model, root, cfg, shape.rollouts_per_model, value_fn, tree);
      break;
    }
    case PlannerMode::Optimism: {
      auto model = source.modal_model();
      OptimisticModel optimistic(*model, cfg.r_max, bonus);
      num_actions = model->num_actions();
      uct_search(optimistic, root, cfg, shape.rollouts_per_model, value_fn, tree);
      break;
    }
    case PlannerMode::ThompsonSampling:
    case PlannerMode::BAMCP: {
      for (int k = 0; k < shape.models; ++k) {
        auto model = source.sample_model(rng());
        num_actions = model->num_actions();
        uct_search(*model, root, cfg, shape.rollouts_per_model, value_fn, tree);
      }
      break;
    }
  }
  PlanResult result = root_result(tree, root, num_actions);
  if (tree_out) *tree_out = std::move(tree);
  return result;
}

}  // namespace soorl
