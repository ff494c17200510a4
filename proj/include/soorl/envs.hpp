#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "soorl/oomdp.hpp"

namespace soorl {

struct EnvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SteppedAfterDone : EnvError {
  SteppedAfterDone() : EnvError("step called on a finished episode") {}
};

/// An atomic action followed by `noops` wait steps.
struct MacroAction {
  int atomic = 0;
  int noops = 0;

  auto operator<=>(const MacroAction&) const = default;
};

struct StepResult {
  FactoredState state;
  int reward = 0;
  bool done = false;
  int primitive_steps = 0;
};

/// Screen extent used to lay the value-function grid over the agent's position.
struct Bounds {
  int x_min = 0;
  int x_max = 1;
  int y_min = 0;
  int y_max = 1;
};

/// Deterministic environment over object states.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual FactoredState reset(std::uint64_t seed) = 0;
  /// One primitive step. Throws SteppedAfterDone once the episode has ended.
  virtual StepResult step_atomic(int action) = 0;
  virtual std::vector<int> atomic_actions() const = 0;
  virtual std::vector<std::string> action_names() const = 0;
  virtual int noop_action() const = 0;
  virtual std::vector<ObjectClass> object_classes() const = 0;
  virtual ClassId agent_class() const = 0;
  virtual std::size_t agent_index() const = 0;
  /// Classes whose motion depends on the agent's actions.
  virtual std::vector<ClassId> controlled_classes() const { return {agent_class()}; }
  /// Every reward value the environment can emit.
  virtual std::vector<int> declared_rewards() const = 0;
  virtual Bounds bounds() const = 0;
  virtual int episode_cap() const = 0;
  virtual bool done() const = 0;
  /// Whether the current episode has achieved the environment's objective.
  virtual bool goal_reached() const { return false; }
  virtual const FactoredState& state() const = 0;
  virtual nlohmann::json render_json() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  /// True dynamics from a decision-point state when that state fully determines
  /// the hidden variables; nullopt otherwise.
  virtual std::optional<StepResult> simulate(const FactoredState&, const MacroAction&) const {
    return std::nullopt;
  }

  /// Executes the atomic action and its trailing no-ops, stopping early at episode end.
  StepResult step(const MacroAction& macro);
};

std::unique_ptr<Environment> make_environment(const std::string& name);
std::vector<std::string> environment_names();

/// Signed paddle move per action for the action-history paddles.
inline constexpr int kPaddleStep = 3;

/// Rounds numer/10 half away from zero.
int round_tenths(int numer);

// ---------------------------------------------------------------------------

struct PongPrimeConfig {
  int width = 40;
  int height = 30;
  int player_height = 6;
  int enemy_height = 18;
  int points_to_win = 5;
  int episode_cap = 3000;
  // Enemy moves one cell on steps where its accumulator overflows: speed = num / den.
  int enemy_speed_num = 13;
  int enemy_speed_den = 21;
  int enemy_deadband = 1;
};

/// Pong with a tall enemy, fast-return zones and a point-winning lower region on the player paddle.
class PongPrime final : public Environment {
 public:
  enum Action : int { NoOp = 0, Up = 1, Down = 2 };
  enum Class : ClassId { Ball = 0, PlayerPaddle = 1, EnemyPaddle = 2, Wall = 3, PlayerGoal = 4, EnemyGoal = 5 };
  enum HitRegion : int { Top = 0, Middle = 1, Lower = 2 };
  // Kernel over the last three actions, in tenths.
  static constexpr std::array<int, 3> kKernel{5, 3, 2};

  explicit PongPrime(PongPrimeConfig cfg = {});

  std::string name() const override { return "pong-prime"; }
  FactoredState reset(std::uint64_t seed) override;
  StepResult step_atomic(int action) override;
  std::vector<int> atomic_actions() const override { return {NoOp, Up, Down}; }
  std::vector<std::string> action_names() const override { return {"NoOp", "Up", "Down"}; }
  int noop_action() const override { return NoOp; }
  std::vector<ObjectClass> object_classes() const override;
  ClassId agent_class() const override { return PlayerPaddle; }
  std::size_t agent_index() const override { return 1; }
  std::vector<int> declared_rewards() const override { return {-1, 0, 1}; }
  Bounds bounds() const override;
  int episode_cap() const override { return cfg_.episode_cap; }
  bool done() const override { return done_; }
  bool goal_reached() const override { return score_player_ >= cfg_.points_to_win; }
  const FactoredState& state() const override { return state_; }
  nlohmann::json render_json() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PongPrime>(*this); }

  const PongPrimeConfig& config() const { return cfg_; }
  int ball_x() const { return ball_x_; }
  int ball_y() const { return ball_y_; }
  int ball_vx() const { return ball_vx_; }
  int ball_vy() const { return ball_vy_; }
  bool ball_fast() const { return fast_; }
  int player_y() const { return player_y_; }
  int enemy_y() const { return enemy_y_; }
  std::array<int, 2> score() const { return {score_player_, score_enemy_}; }
  /// Region of the player paddle at row offset `offset` (0 = top row).
  HitRegion player_region(int offset) const;
  /// Displacement the player paddle would make if `action` were taken now.
  int paddle_displacement(int action) const;
  /// Count of player returns by region and of points won right after a top-region return.
  struct Stats {
    long top_returns = 0;
    long middle_returns = 0;
    long lower_hits = 0;
    long top_return_points = 0;
  };
  const Stats& stats() const { return stats_; }

 private:
  void serve(int toward);
  void sync_state();

  PongPrimeConfig cfg_;
  int ball_x_ = 0, ball_y_ = 0, ball_vx_ = 1, ball_vy_ = 1;
  bool fast_ = false;
  bool fast_phase_ = false;
  int player_y_ = 0;
  int enemy_y_ = 0;
  int enemy_acc_ = 0;
  std::array<int, 3> history_{NoOp, NoOp, NoOp};  // newest first
  int score_player_ = 0, score_enemy_ = 0;
  int steps_ = 0;
  bool done_ = false;
  bool last_return_top_ = false;
  int pending_serve_ = 0;  // direction of the serve due at the next step, 0 when none
  Stats stats_;
  FactoredState state_;
};

// ---------------------------------------------------------------------------

struct MiniPitfallConfig {
  int room_width = 40;
  int pit_first = 18;
  int pit_last = 22;
  int ladder_x = 10;
  int start_x = 5;
  int goal_reward = 1000;
  int episode_cap = 500;
};

/// Two-room side-scroller: room 0 holds a pit, a ladder and the goal flag; room -1 ends in a terminal wall.
/// x is global: room -1 spans [-room_width, -1], room 0 spans [0, room_width - 1].
class MiniPitfall final : public Environment {
 public:
  enum Action : int { NoOp = 0, Left = 1, Right = 2, JumpLeft = 3, JumpRight = 4, Down = 5 };
  enum Class : ClassId { Player = 0, Pit = 1, Ladder = 2, Flag = 3, TerminalWall = 4 };
  static constexpr int kGroundY = 8;  // player top row when standing
  static constexpr int kJumpSteps = 8;
  static constexpr std::array<int, kJumpSteps> kJumpDx{1, 1, 1, 0, 0, 1, 1, 1};
  static constexpr std::array<int, kJumpSteps> kJumpDy{-1, -1, -1, 0, 0, 1, 1, 1};

  explicit MiniPitfall(MiniPitfallConfig cfg = {});

  std::string name() const override { return "mini-pitfall"; }
  FactoredState reset(std::uint64_t seed) override;
  StepResult step_atomic(int action) override;
  std::vector<int> atomic_actions() const override { return {NoOp, Left, Right, JumpLeft, JumpRight, Down}; }
  std::vector<std::string> action_names() const override {
    return {"NoOp", "Left", "Right", "JumpLeft", "JumpRight", "Down"};
  }
  int noop_action() const override { return NoOp; }
  std::vector<ObjectClass> object_classes() const override;
  ClassId agent_class() const override { return Player; }
  std::size_t agent_index() const override { return 0; }
  std::vector<int> declared_rewards() const override { return {0, cfg_.goal_reward}; }
  Bounds bounds() const override;
  int episode_cap() const override { return cfg_.episode_cap; }
  bool done() const override { return done_; }
  bool goal_reached() const override { return reached_goal_; }
  const FactoredState& state() const override { return state_; }
  nlohmann::json render_json() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<MiniPitfall>(*this); }
  std::optional<StepResult> simulate(const FactoredState& s, const MacroAction& m) const override;

  const MiniPitfallConfig& config() const { return cfg_; }
  int player_x() const { return x_; }
  int room() const { return x_ < 0 ? -1 : 0; }
  bool on_ground() const { return jump_phase_ == 0; }
  int jump_phase() const { return jump_phase_; }
  bool reached_goal() const { return reached_goal_; }

 private:
  bool in_pit(int x) const { return x >= cfg_.pit_first && x <= cfg_.pit_last; }
  void sync_state();

  MiniPitfallConfig cfg_;
  int x_ = 0;
  int y_ = kGroundY;
  int jump_phase_ = 0;
  int jump_dir_ = 0;
  int steps_ = 0;
  bool done_ = false;
  bool alive_ = true;
  bool reached_goal_ = false;
  FactoredState state_;
};

// ---------------------------------------------------------------------------

/// A single paddle whose per-step move is a rounded linear kernel over the
/// last `history` actions. history = 1 is memoryless.
class HistoryPaddle final : public Environment {
 public:
  enum Action : int { NoOp = 0, Up = 1, Down = 2 };

  explicit HistoryPaddle(int history, int height = 40, int episode_cap = 200);

  std::string name() const override { return "paddle-history-" + std::to_string(kernel_.size()); }
  FactoredState reset(std::uint64_t seed) override;
  StepResult step_atomic(int action) override;
  std::vector<int> atomic_actions() const override { return {NoOp, Up, Down}; }
  std::vector<std::string> action_names() const override { return {"NoOp", "Up", "Down"}; }
  int noop_action() const override { return NoOp; }
  std::vector<ObjectClass> object_classes() const override { return {{0, "paddle"}}; }
  ClassId agent_class() const override { return 0; }
  std::size_t agent_index() const override { return 0; }
  std::vector<int> declared_rewards() const override { return {0}; }
  Bounds bounds() const override { return {0, 1, 0, height_}; }
  int episode_cap() const override { return cap_; }
  bool done() const override { return done_; }
  const FactoredState& state() const override { return state_; }
  nlohmann::json render_json() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<HistoryPaddle>(*this); }

  const std::vector<int>& kernel() const { return kernel_; }

 private:
  std::vector<int> kernel_;
  std::deque<int> history_;  // newest first
  int height_;
  int cap_;
  int y_ = 0;
  int steps_ = 0;
  bool done_ = false;
  FactoredState state_;
};

}  // namespace soorl
