#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "soorl/harness.hpp"
#include "support/planning_fixtures.hpp"
#include "support/pong_script.hpp"

using namespace soorl;
using namespace soorl::testing;

namespace {

#ifndef SOORL_CONFIG_DIR
#define SOORL_CONFIG_DIR "configs"
#endif

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string config_path(const std::string& name) {
  return (std::filesystem::path(SOORL_CONFIG_DIR) / name).string();
}

// 1. Exploration comparison on mini-Pitfall with the shipped config.
Verdict exploration_ordering() {
  const ExperimentConfig cfg = parse_config(config_path("pitfall.json"));
  const ExperimentOutput out = run_experiment(cfg);
  std::map<PlannerMode, double> mean;
  for (const auto& s : out.summary) mean[s.mode] = s.mean_episodes_to_goal;
  const double opt = mean.at(PlannerMode::Optimism);
  const double ts = mean.at(PlannerMode::ThompsonSampling);
  const double bamcp = mean.at(PlannerMode::BAMCP);
  Verdict v;
  v.pass = opt < ts && ts < bamcp && opt <= 8.0 && bamcp >= 1.5 * opt;
  v.detail = "optimism " + fmt("%.2f", opt) + ", ts " + fmt("%.2f", ts) + ", bamcp " + fmt("%.2f", bamcp) +
             " (need optimism < ts < bamcp, optimism <= 8, bamcp >= 1.5 x optimism)";
  return v;
}

// 2. Pong macro learning recovers two trailing no-ops.
Verdict pong_macros() {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PongPrime env;
    const MacroLearnerConfig lc{8, 0.05, 2000, seed};
    const auto result = learn_macro_actions(env, macro_candidates(env), lc);
    bool all_two = !result.macros.empty();
    for (const auto& m : complete_macro_set(env, result.macros)) all_two = all_two && m.noops == 2;
    good += all_two ? 1 : 0;
  }
  return {good >= 18, std::to_string(good) + "/20 seeds give noops = 2 for every action (need >= 18)"};
}

// 3. Optimism return does not fall as the rollout budget grows.
Verdict rollout_scaling() {
  const ExperimentConfig cfg = parse_config(config_path("pong.json"));
  const ScalingOutput out = compare_rollout_scaling(cfg);
  int violations = 0;
  bool small = true;
  std::string detail;
  for (std::size_t i = 0; i < out.summary.size(); ++i) {
    detail += (i ? ", " : "") + std::to_string(out.summary[i].rollouts) + ": " +
              fmt("%.3f", out.summary[i].mean_return);
    if (i == 0) continue;
    const double drop = out.summary[i - 1].mean_return - out.summary[i].mean_return;
    if (drop > 0.0) {
      ++violations;
      small = small && drop <= 0.5;
    }
  }
  const bool pass = out.summary.size() >= 3 && (violations == 0 || (violations == 1 && small));
  return {pass, "mean return by rollouts " + detail + " over " + std::to_string(cfg.seeds.size()) +
                    " seeds (one drop <= 0.5 allowed)"};
}

// 4. UCT agrees with finite-horizon value iteration on random deterministic MDPs.
Verdict uct_vs_vi() {
  std::mt19937_64 rng(2024);
  int agree = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int states = 10 + static_cast<int>(rng() % 41);
    const int actions = 2 + static_cast<int>(rng() % 3);
    const auto m = random_mdp(states, actions, rng);
    PlannerConfig cfg;
    cfg.mode = PlannerMode::MLE;
    cfg.depth = 12;
    cfg.rollouts = 10000;
    cfg.gamma = 0.95;
    cfg.ucb_c = 8.0;  // about the largest 12-step return with rewards in [0, 1]
    const auto plan = uct_plan(m, at(0), cfg, {});
    const auto q = finite_horizon_q(m, 0, cfg.depth, cfg.gamma);
    const double best = q[static_cast<std::size_t>(argmax(q))];
    agree += q[static_cast<std::size_t>(plan.best_action)] >= best - 1e-12 ? 1 : 0;
  }
  return {agree >= 19, std::to_string(agree) + "/20 root actions match value iteration (need >= 19)"};
}

ObjectRecord located(int x, int y, int w, int h, int action, Outcome out) {
  ObjectRecord r;
  r.history = {{0, x, y, w, h, true}};
  r.partner_history = {std::nullopt};
  r.actions = {action};
  r.outcome = out;
  return r;
}

// 5. Location-only data selects the location model; null entropy matches a direct count.
Verdict location_selection() {
  std::mt19937_64 rng(55);
  ModelFamily fam;
  std::map<int, std::map<Outcome, long>> by_action;
  for (int i = 0; i < 500; ++i) {
    const int x = static_cast<int>(rng() % 10), y = static_cast<int>(rng() % 10), a = static_cast<int>(rng() % 3);
    const Outcome out = Outcome::displacement((x + y) % 3 - 1, (x * y) % 2);
    fam.observe(located(x, y, 1, 1, a, out));
    ++by_action[a][out];
  }
  const int chosen = fam.select_model();
  const int location = feature_set_index({false, true, false});
  const double loc_entropy = empirical_entropy(fam.model(location));
  double nll = 0.0;
  for (const auto& [a, outs] : by_action) {
    long n = 0;
    for (const auto& [o, c] : outs) n += c;
    for (const auto& [o, c] : outs) nll -= static_cast<double>(c) * std::log(static_cast<double>(c) / n);
  }
  const double brute = nll / 500.0;
  const double null_entropy = empirical_entropy(fam.model(0));
  const double gap = std::abs(null_entropy - brute);
  Verdict v;
  v.pass = chosen == location && fam.current_t() == 1 && loc_entropy == 0.0 && gap <= 1e-12;
  std::string label;
  for (const auto& n : kFeatureSets[static_cast<std::size_t>(chosen)].names()) label += (label.empty() ? "" : "+") + n;
  v.detail = "selected " + (label.empty() ? std::string("null") : label) + " at t = " +
             std::to_string(fam.current_t()) + ", location entropy " + fmt("%.3g", loc_entropy) +
             ", null entropy off by " + fmt("%.2e", gap);
  return v;
}

// 6. Adding features never increases empirical entropy.
Verdict refinement_monotone() {
  std::mt19937_64 rng(66);
  long violations = 0, comparisons = 0;
  for (int d = 0; d < 1000; ++d) {
    FamilyConfig fc;
    fc.initial_t = 1 + static_cast<int>(rng() % 2);
    ModelFamily fam({}, fc);
    const int n = 5 + static_cast<int>(rng() % 60);
    const int span = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      ObjectRecord r;
      for (int k = 0; k < 2; ++k) {
        r.history.push_back({0, static_cast<int>(rng() % span), static_cast<int>(rng() % span),
                             1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 2), true});
        if (rng() % 3 == 0) {
          r.partner_history.emplace_back(std::nullopt);
        } else {
          r.partner_history.emplace_back(ObjectState{1, static_cast<int>(rng() % span),
                                                     static_cast<int>(rng() % span), 1, 1, true});
        }
        r.actions.push_back(static_cast<int>(rng() % 3));
      }
      r.outcome = Outcome::displacement(static_cast<int>(rng() % 3) - 1, static_cast<int>(rng() % 2));
      fam.observe(r);
    }
    for (int i = 0; i < kNumFeatureSets; ++i) {
      for (int j = 0; j < kNumFeatureSets; ++j) {
        if (i == j || !kFeatureSets[i].subset_of(kFeatureSets[j])) continue;
        ++comparisons;
        if (empirical_entropy(fam.model(j)) > empirical_entropy(fam.model(i)) + 1e-12) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(comparisons) +
                               " inclusion pairs in 1000 datasets"};
}

// 7. BAMCP grows a larger tree; single-model searches stay within the full tree.
Verdict tree_growth() {
  TwoModelSource src;
  PlannerConfig cfg;
  cfg.depth = 3;
  cfg.rollouts = 200;
  cfg.models = 200;
  cfg.gamma = 0.9;
  SearchTree single, shared;
  std::mt19937_64 r1(4), r2(4);
  cfg.mode = PlannerMode::Optimism;
  strategic_explore(src, at(0), cfg, {}, r1, {}, &single);
  cfg.mode = PlannerMode::BAMCP;
  strategic_explore(src, at(0), cfg, {}, r2, {}, &shared);

  std::mt19937_64 rng(77);
  long over = 0, searches = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int na = 2 + static_cast<int>(rng() % 3);
    const int depth = 2 + static_cast<int>(rng() % 3);
    const FixedSource fixed(random_mdp(40, na, rng));
    long bound = 0;
    for (int h = 0, p = 1; h <= depth; ++h, p *= na) bound += p;
    for (auto mode : {PlannerMode::MLE, PlannerMode::Optimism, PlannerMode::ThompsonSampling}) {
      PlannerConfig c;
      c.mode = mode;
      c.depth = depth;
      c.rollouts = 2000;
      c.gamma = 0.9;
      SearchTree tree;
      std::mt19937_64 r(1);
      strategic_explore(fixed, at(0), c, {}, r, {}, &tree);
      ++searches;
      if (static_cast<long>(tree.node_count()) > bound) ++over;
    }
  }
  Verdict v;
  v.pass = shared.node_count() > single.node_count() && over == 0;
  v.detail = "bamcp " + std::to_string(shared.node_count()) + " nodes vs optimism " +
             std::to_string(single.node_count()) + "; " + std::to_string(over) + "/" + std::to_string(searches) +
             " single-model trees over the bound";
  return v;
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// 8. Running a config twice writes byte-identical row CSVs.
Verdict determinism() {
  namespace fs = std::filesystem;
  bool same = true;
  std::string detail;
  for (const char* name : {"pitfall.json", "pong.json"}) {
    ExperimentConfig cfg = parse_config(config_path(name));
    cfg.seeds.resize(std::min<std::size_t>(cfg.seeds.size(), 2));
    cfg.episodes = std::min(cfg.episodes, 3);
    if (cfg.env == "pong-prime") cfg.agent.planner.rollouts = 50;
    cfg.output_dir = (fs::path(output_dir(cfg)) / "determinism").string();
    const std::string first = file_bytes(run_experiment(cfg).rows_path);
    const std::string second = file_bytes(run_experiment(cfg).rows_path);
    same = same && !first.empty() && first == second;
    detail += std::string(detail.empty() ? "" : ", ") + name + " " + std::to_string(first.size()) + " bytes";
  }
  return {same, "two runs each of " + detail + (same ? " identical" : " differ")};
}

// 9. Top-region returns score about one time in twenty.
Verdict pong_calibration() {
  PongPrime env;
  TopRegionScript script(7);
  long top = 0, points = 0;
  std::uint64_t seed = 0;
  env.reset(seed);
  while (top < 2000) {
    const auto r = env.step_atomic(script.act(env));
    if (r.done) {
      top += env.stats().top_returns;
      points += env.stats().top_return_points;
      env.reset(++seed);
    }
  }
  const double rate = static_cast<double>(points) / static_cast<double>(top);
  return {rate >= 0.03 && rate <= 0.07, fmt("%.4f", rate) + " of " + std::to_string(top) +
                                            " top-region returns scored (need 0.03 to 0.07)"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "mini-pitfall exploration ordering", 600, exploration_ordering},
      {2, "pong macro learning", 120, pong_macros},
      {3, "rollout scaling", 900, rollout_scaling},
      {4, "uct matches value iteration", 60, uct_vs_vi},
      {5, "location model selection", 60, location_selection},
      {6, "refinement monotonicity", 60, refinement_monotone},
      {7, "tree growth", 60, tree_growth},
      {8, "determinism", 300, determinism},
      {9, "pong calibration", 60, pong_calibration},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = v.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("criterion %d %s: %s | %s | %.1f s (limit %.0f s)\n", c.id, pass ? "PASS" : "FAIL", c.name,
                v.detail.c_str(), secs, c.limit_seconds);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
