#include <random>

#include "doctest.h"
#include "soorl/envs.hpp"
#include "soorl/models.hpp"
#include "support/pong_script.hpp"

using namespace soorl;

namespace {

std::uint64_t seed_with_player_at_least(int y_min) {
  for (std::uint64_t s = 0;; ++s) {
    PongPrime env;
    env.reset(s);
    if (env.player_y() >= y_min) return s;
  }
}

bool has_pair(const FactoredState& s, ClassId a, ClassId b) {
  for (const auto& p : detect_interactions(s)) {
    const ClassId ca = s.objects[p.first].class_id, cb = s.objects[p.second].class_id;
    if ((ca == a && cb == b) || (ca == b && cb == a)) return true;
  }
  return false;
}

MiniPitfall walk_to(int x) {
  MiniPitfall env;
  env.reset(0);
  while (env.player_x() < x) env.step_atomic(MiniPitfall::Right);
  while (env.player_x() > x) env.step_atomic(MiniPitfall::Left);
  return env;
}

}  // namespace

TEST_CASE("round_tenths rounds half away from zero") {
  CHECK(round_tenths(15) == 2);
  CHECK(round_tenths(-15) == -2);
  CHECK(round_tenths(14) == 1);
  CHECK(round_tenths(-6) == -1);
  CHECK(round_tenths(0) == 0);
}

TEST_CASE("pong paddle follows the three-action kernel") {
  PongPrime env;
  env.reset(seed_with_player_at_least(10));
  const int y0 = env.player_y();
  // Up moves 3 cells toward y = 0; per-step moves are round(0.5a0 + 0.3a1 + 0.2a2).
  const int expected[] = {-2, -4, -7, -9, -10, -10};
  const int actions[] = {PongPrime::Up, PongPrime::Up, PongPrime::Up, PongPrime::NoOp, PongPrime::NoOp,
                         PongPrime::NoOp};
  for (int i = 0; i < 6; ++i) {
    env.step_atomic(actions[i]);
    CHECK(env.player_y() == y0 + expected[i]);
  }
}

TEST_CASE("pong geometry") {
  PongPrime env;
  const auto s = env.reset(0);
  const auto& ball = s.objects[0];
  const auto& player = s.objects[env.agent_index()];
  const auto& enemy = s.objects[2];
  CHECK(ball.class_id == PongPrime::Ball);
  CHECK(player.class_id == PongPrime::PlayerPaddle);
  CHECK(enemy.h == 3 * player.h);
  CHECK(env.player_region(0) == PongPrime::Top);
  CHECK(env.player_region(2) == PongPrime::Top);
  CHECK(env.player_region(3) == PongPrime::Middle);
  CHECK(env.player_region(4) == PongPrime::Middle);
  CHECK(env.player_region(5) == PongPrime::Lower);
}

TEST_CASE("pong scoring rules") {
  PongPrime env;
  env.reset(4);
  testing::TopRegionScript script(1);
  std::mt19937_64 rng(9);
  long lower = 0, conceded = 0;
  for (int episode = 0; episode < 20; ++episode) {
    env.reset(static_cast<std::uint64_t>(episode));
    while (!env.done()) {
      const auto before = env.stats();
      const auto score = env.score();
      // Mix the top-region script with random play so every region gets hit.
      const int a = rng() % 3 == 0 ? static_cast<int>(rng() % 3) : script.act(env);
      const auto r = env.step_atomic(a);
      if (env.stats().lower_hits > before.lower_hits) {
        ++lower;
        CHECK(r.reward == 1);
        CHECK(bounding_box_overlap(r.state.objects[0], r.state.objects[1]));
      }
      if (env.score()[1] > score[1]) {
        ++conceded;
        CHECK(r.reward == -1);
        CHECK(bounding_box_overlap(r.state.objects[0], r.state.objects[5]));
      }
      if (r.reward != 0 && !env.done()) {
        const auto served = env.step_atomic(PongPrime::NoOp);
        CHECK(served.reward == 0);
        CHECK(env.ball_x() == env.config().width / 2);
        CHECK(env.ball_y() == env.config().height / 2);
      }
      if (r.reward == 1) CHECK(env.score()[0] == score[0] + 1);
    }
    CHECK((env.score()[0] == 5 || env.score()[1] == 5 || env.state().step == env.episode_cap()));
  }
  CHECK(lower > 0);
  CHECK(conceded > 0);
  CHECK_THROWS_AS(env.step_atomic(PongPrime::NoOp), SteppedAfterDone);
}

TEST_CASE("pong ball and paddle interactions are detectable") {
  PongPrime env;
  env.reset(2);
  testing::TopRegionScript script(3);
  bool saw = false;
  while (!env.done() && !saw) {
    const long returns = env.stats().top_returns + env.stats().middle_returns;
    env.step_atomic(script.act(env));
    if (env.stats().top_returns + env.stats().middle_returns > returns) {
      saw = has_pair(env.state(), PongPrime::Ball, PongPrime::PlayerPaddle);
    }
  }
  CHECK(saw);
}

TEST_CASE("environments are deterministic under replay") {
  std::mt19937_64 rng(31);
  for (const auto& name : environment_names()) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::uint64_t seed = rng();
      std::vector<int> actions;
      auto probe = make_environment(name);
      const auto acts = probe->atomic_actions();
      for (int i = 0; i < 60; ++i) actions.push_back(acts[rng() % acts.size()]);
      std::string traces[2];
      for (auto& trace : traces) {
        auto env = make_environment(name);
        trace = nlohmann::json(env->reset(seed)).dump();
        for (int a : actions) {
          if (env->done()) break;
          const auto r = env->step_atomic(a);
          trace += nlohmann::json(r.state).dump() + std::to_string(r.reward);
        }
      }
      REQUIRE(traces[0] == traces[1]);
    }
  }
}

TEST_CASE("pong paddle needs a three-step history") {
  PongPrime env;
  std::mt19937_64 rng(5);
  FamilyConfig one, three;
  three.initial_t = 3;
  ModelFamily fam1({FamilyKind::Transition, PongPrime::PlayerPaddle}, one);
  ModelFamily fam3({FamilyKind::Transition, PongPrime::PlayerPaddle}, three);
  for (int episode = 0; episode < 5; ++episode) {
    env.reset(static_cast<std::uint64_t>(episode));
    std::vector<ObjectState> hist;
    std::vector<int> acts;
    while (!env.done()) {
      const int a = static_cast<int>(rng() % 3);
      hist.push_back(env.state().objects[1]);
      acts.push_back(a);
      env.step_atomic(a);
      const ObjectState& now = env.state().objects[1];
      ObjectRecord r;
      r.history = hist;
      r.partner_history.assign(hist.size(), std::nullopt);
      r.actions = acts;
      r.outcome = Outcome::displacement(now.x - hist.back().x, now.y - hist.back().y);
      fam1.observe(r);
      if (hist.size() >= 3) fam3.observe(r);
    }
  }
  for (int k = 0; k < kNumFeatureSets; ++k) CHECK(empirical_entropy(fam1.model(k)) > 0.0);
  fam3.select_model();
  CHECK(empirical_entropy(fam3.selected_model()) == 0.0);
}

TEST_CASE("history paddles move by their kernel") {
  for (int h = 1; h <= 4; ++h) {
    HistoryPaddle env(h);
    env.reset(0);
    CHECK(env.name() == "paddle-history-" + std::to_string(h));
    int sum = 0;
    for (int v : env.kernel()) sum += v;
    CHECK(sum == 10);
    const int y0 = env.state().objects[0].y;
    env.step_atomic(HistoryPaddle::Down);
    for (int i = 1; i < h + 2; ++i) env.step_atomic(HistoryPaddle::NoOp);
    int expected = 0;
    for (int v : env.kernel()) expected += round_tenths(v * kPaddleStep);
    CHECK(env.state().objects[0].y - y0 == expected);
  }
}

TEST_CASE("mini-pitfall goal flag") {
  MiniPitfall env;
  env.reset(0);
  for (int i = 0; i < 12; ++i) env.step_atomic(MiniPitfall::Right);
  REQUIRE(env.player_x() == 17);
  env.step_atomic(MiniPitfall::JumpRight);
  for (int i = 1; i < MiniPitfall::kJumpSteps; ++i) env.step_atomic(MiniPitfall::NoOp);
  CHECK(env.player_x() == 23);
  CHECK(env.on_ground());
  CHECK_FALSE(env.done());
  while (env.player_x() < 38) {
    const auto r = env.step_atomic(MiniPitfall::Right);
    CHECK(r.reward == 0);
    CHECK_FALSE(r.done);
  }
  CHECK(has_pair(env.state(), MiniPitfall::Player, MiniPitfall::Flag));
  const auto r = env.step_atomic(MiniPitfall::Right);
  CHECK(r.reward == 1000);
  CHECK(r.done);
  CHECK(env.reached_goal());
  CHECK_THROWS_AS(env.step_atomic(MiniPitfall::NoOp), SteppedAfterDone);
}

TEST_CASE("mini-pitfall hazards") {
  SUBCASE("walking into the pit") {
    MiniPitfall env = walk_to(17);
    CHECK(has_pair(env.state(), MiniPitfall::Player, MiniPitfall::Pit));
    const auto r = env.step_atomic(MiniPitfall::Right);
    CHECK(r.done);
    CHECK(r.reward == 0);
    CHECK_FALSE(r.state.objects[0].alive);
  }
  SUBCASE("jumping the pit") {
    MiniPitfall env = walk_to(17);
    const auto r = env.step(MacroAction{MiniPitfall::JumpRight, 7});
    CHECK_FALSE(r.done);
    CHECK(r.reward == 0);
    CHECK(r.primitive_steps == 8);
    CHECK(env.player_x() == 23);
  }
  SUBCASE("ladder down") {
    MiniPitfall env = walk_to(10);
    CHECK(env.step_atomic(MiniPitfall::Down).done);
  }
  SUBCASE("left end of the second room") {
    MiniPitfall env;
    env.reset(0);
    StepResult r;
    int steps = 0;
    do {
      r = env.step_atomic(MiniPitfall::Left);
      ++steps;
      if (env.player_x() < 0) CHECK(env.room() == -1);
    } while (!r.done);
    CHECK(steps == 5 + 40 + 1);
    CHECK(r.reward == 0);
  }
  SUBCASE("episode cap") {
    MiniPitfall env;
    env.reset(0);
    int steps = 0;
    while (!env.step_atomic(MiniPitfall::NoOp).done) ++steps;
    CHECK(steps + 1 == env.episode_cap());
  }
}

TEST_CASE("mini-pitfall simulate matches stepping from ground states") {
  std::mt19937_64 rng(12);
  const std::vector<MacroAction> macros{{MiniPitfall::NoOp, 0},      {MiniPitfall::Left, 0},
                                        {MiniPitfall::Right, 0},     {MiniPitfall::JumpLeft, 7},
                                        {MiniPitfall::JumpRight, 7}, {MiniPitfall::Down, 0}};
  for (int episode = 0; episode < 50; ++episode) {
    MiniPitfall env;
    env.reset(0);
    while (!env.done()) {
      const MacroAction m = macros[rng() % macros.size()];
      const auto sim = env.simulate(env.state(), m);
      const auto real = env.step(m);
      REQUIRE(sim);
      if (real.primitive_steps < 1 + m.noops && !sim->done) continue;  // cut short by the cap
      CHECK(sim->state.objects == real.state.objects);
      CHECK(sim->reward == real.reward);
      if (real.state.step < env.episode_cap()) CHECK(sim->done == real.done);
    }
  }
}

TEST_CASE("make_environment knows every listed name") {
  for (const auto& n : environment_names()) CHECK(make_environment(n)->name() == n);
  CHECK_THROWS_AS(make_environment("breakout"), EnvError);
}
