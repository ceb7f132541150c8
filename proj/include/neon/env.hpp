#pragma once

#include <cstdint>
#include <vector>

#include "neon/image.hpp"
#include "neon/mdp.hpp"

namespace neon {

enum class Action : int { Left = 0, NoMove = 1, Right = 2 };
inline constexpr int kNumActions = 3;

// Three-lane dodging course over a fixed, seed-determined obstacle pattern.
// One step() call is one decision step; an obstacle row reaches the car every
// steps_between_rows decision steps, and every row leaves at least one lane
// that is reachable in time from any survivable position.
struct EnvConfig {
  int frame_width = 640;
  int frame_height = 360;
  int lane_count = 3;
  std::uint64_t pattern_seed = 1;
  int steps_between_rows = 3;
  int step_cap = 90;
  // Fraction of obstacle rows that block two lanes instead of one.
  double double_block_prob = 0.6;

  int num_rows() const { return step_cap / steps_between_rows; }
};

struct EnvState {
  int lane = 1;
  int step = 0;             // decision steps taken this episode
  int obstacle_cursor = 0;  // next pattern row to reach the car
  int obstacles_passed = 0;
  bool terminal = false;    // collision only; the step cap ends an episode
                            // without setting this flag
};

// Ground truth for tests and diagnostics; the learning loop must not read it.
struct StepInfo {
  bool collided = false;
  int obstacles_passed = 0;
  int lane = 1;
};

class LaneEnv {
 public:
  explicit LaneEnv(const EnvConfig& config);  // rejects invalid configs

  const Frame& reset();
  // Applies one decision step. Rejects calls on a terminal state or past the
  // step cap. On collision, the returned frame is the canonical game-over
  // screen and terminal() becomes true.
  const Frame& step(Action action);

  bool terminal() const { return state_.terminal; }
  bool episode_over() const { return state_.terminal || state_.step >= config_.step_cap; }
  const EnvState& state() const { return state_; }
  const StepInfo& info() const { return info_; }
  const EnvConfig& config() const { return config_; }
  const std::vector<std::uint8_t>& pattern() const { return pattern_; }

  Frame game_over_frame() const { return make_game_over_frame(config_); }

  static Frame render(const EnvState& state, const EnvConfig& config,
                      const std::vector<std::uint8_t>& pattern);
  static Frame make_game_over_frame(const EnvConfig& config);

 private:
  EnvConfig config_;
  std::vector<std::uint8_t> pattern_;  // per-row occupied-lane bitmasks
  EnvState state_;
  StepInfo info_;
  Frame frame_;
};

// Seed-determined occupancy bitmasks, one per row, each leaving at least one
// lane reachable within steps_between_rows moves from every survivable
// position (so an optimal policy survives the whole episode).
std::vector<std::uint8_t> generate_pattern(const EnvConfig& config);

// Tabular mirror of the environment minus rendering: states are
// (lane, decision step), transitions duplicate step(), rewards follow the
// pixel reward semantics (+1 per surviving step once the first obstacle row
// is behind the car, 0 on collision).
TabularMdp abstract_mdp(const EnvConfig& config);

inline int mdp_state(int lane, int step) { return step * 3 + lane; }

}  // namespace neon
