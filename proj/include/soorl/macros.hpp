#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "soorl/envs.hpp"
#include "soorl/models.hpp"

namespace soorl {

struct MacroLearnerConfig {
  int k_max = 8;
  double threshold = 0.05;
  int budget_per_eval = 2000;  // macro steps of fresh data per candidate
  std::uint64_t seed = 0;
};

struct MacroTraceEntry {
  int iteration = 0;
  int action = 0;        // atomic id whose no-op count was tried
  int tried_noops = 0;
  int total_noops = 0;   // over the candidate set
  double total_entropy = 0.0;
  bool accepted = false;
};

struct MacroLearnResult {
  std::map<int, MacroAction> macros;  // atomic id -> learned macro
  std::vector<MacroTraceEntry> trace;
};

/// Atomic actions eligible for macro learning: all but the no-op itself.
std::vector<int> macro_candidates(const Environment& env);

/// Collects `budget` macro steps under a uniform-random policy over `macros`,
/// fits t = 1 model families for the controlled classes and returns the summed
/// entropy of each family's selected model.
double macro_set_entropy(Environment& env, const std::vector<MacroAction>& macros, int budget,
                         std::mt19937_64& rng, double epsilon_ent);

/// Greedy no-op reduction: every action starts at k_max no-ops; reductions that
/// push total entropy to the threshold or above are undone and freeze that action.
MacroLearnResult learn_macro_actions(Environment& env, const std::vector<int>& atomic_actions,
                                     const MacroLearnerConfig& cfg);

/// Learned macros plus the environment's no-op padded to the largest learned wait.
std::vector<MacroAction> complete_macro_set(const Environment& env,
                                            const std::map<int, MacroAction>& learned);

}  // namespace soorl
