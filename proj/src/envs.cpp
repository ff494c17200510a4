#include "soorl/envs.hpp"

#include <algorithm>
#include <random>

namespace soorl {

int round_tenths(int numer) { return numer >= 0 ? (numer + 5) / 10 : -((-numer + 5) / 10); }

StepResult Environment::step(const MacroAction& macro) {
  StepResult total = step_atomic(macro.atomic);
  total.primitive_steps = 1;
  for (int i = 0; i < macro.noops && !total.done; ++i) {
    StepResult r = step_atomic(noop_action());
    total.reward += r.reward;
    total.done = r.done;
    total.state = std::move(r.state);
    ++total.primitive_steps;
  }
  return total;
}

std::vector<std::string> environment_names() {
  return {"pong-prime", "mini-pitfall", "paddle-history-1", "paddle-history-2", "paddle-history-3",
          "paddle-history-4"};
}

std::unique_ptr<Environment> make_environment(const std::string& name) {
  if (name == "pong-prime") return std::make_unique<PongPrime>();
  if (name == "mini-pitfall") return std::make_unique<MiniPitfall>();
  const std::string prefix = "paddle-history-";
  if (name.rfind(prefix, 0) == 0 && name.size() == prefix.size() + 1) {
    const int h = name.back() - '0';
    if (h >= 1 && h <= 4) return std::make_unique<HistoryPaddle>(h);
  }
  throw EnvError("unknown environment '" + name + "'");
}

// ---------------------------------------------------------------------------
// Pong Prime

namespace {
int move_of(int action) {
  switch (action) {
    case PongPrime::Up: return -kPaddleStep;  // up is towards y = 0
    case PongPrime::Down: return kPaddleStep;
    default: return 0;
  }
}
}  // namespace

PongPrime::PongPrime(PongPrimeConfig cfg) : cfg_(cfg) { reset(0); }

std::vector<ObjectClass> PongPrime::object_classes() const {
  return {{Ball, "ball"},   {PlayerPaddle, "player"},   {EnemyPaddle, "enemy"},
          {Wall, "wall"},   {PlayerGoal, "player_goal"}, {EnemyGoal, "enemy_goal"}};
}

Bounds PongPrime::bounds() const { return {0, cfg_.width, 0, cfg_.height}; }

PongPrime::HitRegion PongPrime::player_region(int offset) const {
  // 6 rows: top 3 (50%), middle 2 (~45%), lower 1 (~5%, rounded up to one cell).
  const int top = cfg_.player_height / 2;
  if (offset < top) return Top;
  if (offset < cfg_.player_height - 1) return Middle;
  return Lower;
}

int PongPrime::paddle_displacement(int action) const {
  const int numer = kKernel[0] * move_of(action) + kKernel[1] * move_of(history_[0]) +
                    kKernel[2] * move_of(history_[1]);
  const int target = std::clamp(player_y_ + round_tenths(numer), 0, cfg_.height - cfg_.player_height);
  return target - player_y_;
}

FactoredState PongPrime::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  player_y_ = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg_.height - cfg_.player_height + 1));
  enemy_y_ = (cfg_.height - cfg_.enemy_height) / 2;
  enemy_acc_ = 0;
  history_ = {NoOp, NoOp, NoOp};
  score_player_ = score_enemy_ = 0;
  pending_serve_ = 0;
  steps_ = 0;
  done_ = false;
  stats_ = {};
  serve(-1);
  ball_vy_ = (rng() & 1U) ? 1 : -1;
  sync_state();
  return state_;
}

void PongPrime::serve(int toward) {
  ball_x_ = cfg_.width / 2;
  ball_y_ = cfg_.height / 2;
  ball_vx_ = toward;
  ball_vy_ = 1;
  fast_ = false;
  fast_phase_ = false;
  last_return_top_ = false;
}

StepResult PongPrime::step_atomic(int action) {
  if (done_) throw SteppedAfterDone();
  if (action < NoOp || action > Down) throw EnvError("invalid pong action");

  player_y_ += paddle_displacement(action);
  history_ = {action, history_[0], history_[1]};

  // Enemy tracks the ball centre with a capped speed.
  const int target = std::clamp(ball_y_ - cfg_.enemy_height / 2, 0, cfg_.height - cfg_.enemy_height);
  const int diff = target - enemy_y_;
  // No deadband against the walls, otherwise the outermost row is never covered.
  const bool at_wall = target == 0 || target == cfg_.height - cfg_.enemy_height;
  if (std::abs(diff) > (at_wall ? 0 : cfg_.enemy_deadband)) {
    enemy_acc_ += cfg_.enemy_speed_num;
    if (enemy_acc_ >= cfg_.enemy_speed_den) {
      enemy_acc_ -= cfg_.enemy_speed_den;
      enemy_y_ += diff > 0 ? 1 : -1;
    }
  }

  // A point leaves the ball in the goal (or on the paddle) for one frame; the serve follows.
  if (pending_serve_ != 0) {
    serve(pending_serve_);
    pending_serve_ = 0;
    ++steps_;
    done_ = steps_ >= cfg_.episode_cap;
    sync_state();
    return {state_, 0, done_, 1};
  }

  int speed = 1;
  if (fast_) {
    speed = fast_phase_ ? 2 : 1;
    fast_phase_ = !fast_phase_;
  }
  const int old_x = ball_x_;
  ball_x_ += ball_vx_ * speed;
  ball_y_ += ball_vy_;
  if (ball_y_ < 0) {
    ball_y_ = -ball_y_;
    ball_vy_ = 1;
  } else if (ball_y_ > cfg_.height - 1) {
    ball_y_ = 2 * (cfg_.height - 1) - ball_y_;
    ball_vy_ = -1;
  }

  int reward = 0;
  const int player_col = 1;
  const int enemy_col = cfg_.width - 2;
  if (ball_vx_ < 0 && old_x > player_col && ball_x_ <= player_col) {
    const int offset = ball_y_ - player_y_;
    if (offset >= 0 && offset < cfg_.player_height) {
      switch (player_region(offset)) {
        case Top:
          ++stats_.top_returns;
          ball_x_ = player_col + 1;
          ball_vx_ = 1;
          fast_ = true;
          fast_phase_ = true;
          // The outermost rows steer the ball.
          if (offset == 0) ball_vy_ = -1;
          if (offset == 2) ball_vy_ = 1;
          last_return_top_ = true;
          break;
        case Middle:
          ++stats_.middle_returns;
          ball_x_ = player_col + 1;
          ball_vx_ = 1;
          fast_ = false;
          last_return_top_ = false;
          break;
        case Lower:
          ++stats_.lower_hits;
          reward = 1;
          break;
      }
    }
  } else if (ball_vx_ > 0 && old_x < enemy_col && ball_x_ >= enemy_col) {
    const int offset = ball_y_ - enemy_y_;
    if (offset >= 0 && offset < cfg_.enemy_height) {
      const int zone = std::max(1, cfg_.enemy_height / 10);
      ball_x_ = enemy_col - 1;
      ball_vx_ = -1;
      fast_ = offset < zone || offset >= cfg_.enemy_height - zone;
      fast_phase_ = true;
      last_return_top_ = false;
    }
  }
  if (reward == 0 && ball_x_ < 0) reward = -1;
  if (reward == 0 && ball_x_ > cfg_.width - 1) {
    reward = 1;
    if (last_return_top_) ++stats_.top_return_points;
  }
  if (reward > 0) {
    ++score_player_;
    ball_x_ = std::min(ball_x_, cfg_.width);
    pending_serve_ = 1;
  } else if (reward < 0) {
    ++score_enemy_;
    ball_x_ = -1;
    pending_serve_ = -1;
  }

  ++steps_;
  done_ = score_player_ >= cfg_.points_to_win || score_enemy_ >= cfg_.points_to_win ||
          steps_ >= cfg_.episode_cap;
  sync_state();
  return {state_, reward, done_, 1};
}

void PongPrime::sync_state() {
  const int w = cfg_.width;
  const int h = cfg_.height;
  state_.step = steps_;
  state_.objects = {
      {Ball, ball_x_, ball_y_, 1, 1, true},
      {PlayerPaddle, 1, player_y_, 1, cfg_.player_height, true},
      {EnemyPaddle, w - 2, enemy_y_, 1, cfg_.enemy_height, true},
      {Wall, 0, -1, w, 1, true},
      {Wall, 0, h, w, 1, true},
      {PlayerGoal, -2, 0, 1, h, true},
      {EnemyGoal, w + 1, 0, 1, h, true},
  };
}

nlohmann::json PongPrime::render_json() const {
  return {{"env", name()},
          {"state", state_},
          {"ball_velocity", {ball_vx_, ball_vy_}},
          {"fast", fast_},
          {"score", {score_player_, score_enemy_}},
          {"done", done_}};
}

// ---------------------------------------------------------------------------
// mini-Pitfall

MiniPitfall::MiniPitfall(MiniPitfallConfig cfg) : cfg_(cfg) { reset(0); }

std::vector<ObjectClass> MiniPitfall::object_classes() const {
  return {{Player, "player"}, {Pit, "pit"}, {Ladder, "ladder"}, {Flag, "flag"}, {TerminalWall, "wall"}};
}

Bounds MiniPitfall::bounds() const { return {-cfg_.room_width, cfg_.room_width, 0, kGroundY + 2}; }

FactoredState MiniPitfall::reset(std::uint64_t /*seed*/) {
  x_ = cfg_.start_x;
  y_ = kGroundY;
  jump_phase_ = 0;
  jump_dir_ = 0;
  steps_ = 0;
  done_ = false;
  alive_ = true;
  reached_goal_ = false;
  sync_state();
  return state_;
}

StepResult MiniPitfall::step_atomic(int action) {
  if (done_) throw SteppedAfterDone();
  if (action < NoOp || action > Down) throw EnvError("invalid mini-pitfall action");

  const int flag_x = cfg_.room_width - 1;
  const int left_edge = -cfg_.room_width;
  int reward = 0;

  if (jump_phase_ == 0) {
    switch (action) {
      case Left: x_ -= 1; break;
      case Right:
        if (x_ + 1 == flag_x) {
          reached_goal_ = true;
          reward = cfg_.goal_reward;
        }
        x_ = std::min(x_ + 1, flag_x);
        break;
      case JumpLeft: jump_dir_ = -1; break;
      case JumpRight: jump_dir_ = 1; break;
      case Down:
        if (x_ == cfg_.ladder_x) alive_ = false;  // into the underground
        break;
      default: break;
    }
  }
  if (jump_dir_ != 0) {
    const auto k = static_cast<std::size_t>(jump_phase_);
    // The flag pole blocks jumps: the player stops one cell short of it.
    x_ = std::min(x_ + jump_dir_ * kJumpDx[k], flag_x - 1);
    y_ += kJumpDy[k];
    if (++jump_phase_ == kJumpSteps) {
      jump_phase_ = 0;
      jump_dir_ = 0;
      y_ = kGroundY;
    }
  }
  if (x_ < left_edge) {
    x_ = left_edge - 1;
    alive_ = false;
  }
  if (jump_phase_ == 0 && in_pit(x_)) alive_ = false;
  if (reached_goal_) alive_ = false;

  ++steps_;
  done_ = !alive_ || steps_ >= cfg_.episode_cap;
  sync_state();
  return {state_, reward, done_, 1};
}

std::optional<StepResult> MiniPitfall::simulate(const FactoredState& s, const MacroAction& m) const {
  if (s.objects.empty()) return std::nullopt;
  const ObjectState& p = s.objects[0];
  if (!p.alive || p.y != kGroundY) return std::nullopt;
  MiniPitfall sim(cfg_);
  sim.x_ = p.x;
  sim.y_ = p.y;
  sim.steps_ = 0;
  sim.cfg_.episode_cap = 1 << 30;
  sim.sync_state();
  StepResult r = sim.step(m);
  r.state.step = s.step + r.primitive_steps;
  return r;
}

void MiniPitfall::sync_state() {
  const int w = cfg_.room_width;
  state_.step = steps_;
  state_.objects = {
      {Player, x_, y_, 1, 2, alive_},
      {Pit, cfg_.pit_first, kGroundY + 2, cfg_.pit_last - cfg_.pit_first + 1, 1, true},
      {Ladder, cfg_.ladder_x, kGroundY + 2, 1, 1, true},
      {Flag, w - 1, kGroundY - 2, 1, 4, true},
      {TerminalWall, -w - 1, 0, 1, kGroundY + 2, true},
  };
}

nlohmann::json MiniPitfall::render_json() const {
  return {{"env", name()},      {"state", state_},        {"room", room()},
          {"on_ground", on_ground()}, {"jump_phase", jump_phase_}, {"done", done_},
          {"reached_goal", reached_goal_}};
}

// ---------------------------------------------------------------------------
// History paddle

namespace {
std::vector<int> kernel_for(int history) {
  switch (history) {
    case 1: return {10};
    case 2: return {6, 4};
    case 3: return {5, 3, 2};
    case 4: return {4, 3, 2, 1};
    default: throw EnvError("paddle history must be in [1, 4]");
  }
}
}  // namespace

HistoryPaddle::HistoryPaddle(int history, int height, int episode_cap)
    : kernel_(kernel_for(history)), height_(height), cap_(episode_cap) {
  reset(0);
}

FactoredState HistoryPaddle::reset(std::uint64_t /*seed*/) {
  history_.assign(kernel_.size(), NoOp);
  y_ = (height_ - 6) / 2;
  steps_ = 0;
  done_ = false;
  state_ = {{{0, 0, y_, 1, 6, true}}, 0};
  return state_;
}

StepResult HistoryPaddle::step_atomic(int action) {
  if (done_) throw SteppedAfterDone();
  if (action < NoOp || action > Down) throw EnvError("invalid paddle action");
  history_.push_front(action);
  history_.pop_back();
  int numer = 0;
  for (std::size_t i = 0; i < kernel_.size(); ++i) numer += kernel_[i] * move_of(history_[i]);
  y_ = std::clamp(y_ + round_tenths(numer), 0, height_ - 6);
  ++steps_;
  done_ = steps_ >= cap_;
  state_ = {{{0, 0, y_, 1, 6, true}}, steps_};
  return {state_, 0, done_, 1};
}

nlohmann::json HistoryPaddle::render_json() const {
  return {{"env", name()}, {"state", state_}, {"done", done_}};
}

}  // namespace soorl
