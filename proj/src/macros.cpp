#include "soorl/macros.hpp"

#include <algorithm>
#include <deque>

namespace soorl {

std::vector<int> macro_candidates(const Environment& env) {
  std::vector<int> out;
  for (int a : env.atomic_actions()) {
    if (a != env.noop_action()) out.push_back(a);
  }
  return out;
}

namespace {

std::optional<ObjectState> first_partner(const FactoredState& s, std::size_t index) {
  for (std::size_t j = 0; j < s.objects.size(); ++j) {
    if (j != index && s.objects[j].alive && s.objects[index].alive &&
        bounding_box_overlap(s.objects[index], s.objects[j])) {
      return s.objects[j];
    }
  }
  return std::nullopt;
}

}  // namespace

double macro_set_entropy(Environment& env, const std::vector<MacroAction>& macros, int budget,
                         std::mt19937_64& rng, double epsilon_ent) {
  const auto controlled = env.controlled_classes();
  std::map<ClassId, ModelFamily> families;
  for (ClassId c : controlled) {
    FamilyConfig fc;
    fc.epsilon_ent = epsilon_ent;
    families.emplace(c, ModelFamily({FamilyKind::Transition, c}, fc));
  }
  std::uniform_int_distribution<std::size_t> pick(0, macros.size() - 1);
  FactoredState current = env.reset(rng());
  for (int step = 0; step < budget; ++step) {
    const MacroAction& m = macros[pick(rng)];
    StepResult r = env.step(m);
    // A macro cut short by the episode end has no comparable outcome.
    const bool truncated = r.primitive_steps < 1 + m.noops;
    for (std::size_t i = 0; i < current.objects.size(); ++i) {
      const ObjectState& before = current.objects[i];
      auto fam = families.find(before.class_id);
      if (truncated || fam == families.end() || !before.alive || i >= r.state.objects.size()) continue;
      const ObjectState& after = r.state.objects[i];
      ObjectRecord rec;
      rec.history = {before};
      rec.partner_history = {first_partner(current, i)};
      rec.actions = {m.atomic};
      rec.outcome = Outcome::displacement(after.x - before.x, after.y - before.y, !after.alive);
      fam->second.observe(rec);
    }
    current = r.done ? env.reset(rng()) : std::move(r.state);
  }
  double total = 0.0;
  for (auto& [c, fam] : families) {
    fam.select_model();
    total += empirical_entropy(fam.selected_model());
  }
  return total;
}

MacroLearnResult learn_macro_actions(Environment& env, const std::vector<int>& atomic_actions,
                                     const MacroLearnerConfig& cfg) {
  MacroLearnResult result;
  if (atomic_actions.empty()) return result;
  std::mt19937_64 rng(cfg.seed);
  for (int a : atomic_actions) result.macros[a] = {a, std::max(cfg.k_max, 0)};

  auto current_set = [&] {
    std::vector<MacroAction> set;
    for (int a : atomic_actions) set.push_back(result.macros[a]);
    return set;
  };
  auto total_noops = [&] {
    int n = 0;
    for (const auto& [a, m] : result.macros) n += m.noops;
    return n;
  };

  std::deque<int> reducible(atomic_actions.begin(), atomic_actions.end());
  int iteration = 0;
  while (!reducible.empty()) {
    const int a = reducible.front();
    reducible.pop_front();
    MacroAction& macro = result.macros[a];
    if (macro.noops == 0) continue;  // nothing left to reduce

    --macro.noops;
    ++iteration;
    const double tau = macro_set_entropy(env, current_set(), cfg.budget_per_eval, rng, cfg.threshold);
    const bool accepted = tau < cfg.threshold;
    result.trace.push_back({iteration, a, macro.noops, total_noops(), tau, accepted});
    if (accepted) {
      reducible.push_back(a);
    } else {
      ++macro.noops;
    }
  }
  return result;
}

std::vector<MacroAction> complete_macro_set(const Environment& env,
                                            const std::map<int, MacroAction>& learned) {
  int longest = 0;
  for (const auto& [a, m] : learned) longest = std::max(longest, m.noops);
  std::vector<MacroAction> set;
  for (int a : env.atomic_actions()) {
    auto it = learned.find(a);
    if (it != learned.end()) {
      set.push_back(it->second);
    } else {
      set.push_back({a, a == env.noop_action() ? longest : 0});
    }
  }
  return set;
}

}  // namespace soorl
