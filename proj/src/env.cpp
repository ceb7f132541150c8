#include "neon/env.hpp"

#include <algorithm>
#include <stdexcept>

#include "neon/filter.hpp"
#include "neon/rng.hpp"

namespace neon {

namespace {

int clamp_lane(int lane) { return std::clamp(lane, 0, 2); }

// Triangle wave of period 2n with amplitude n, for the animated shading.
int tri(int phase, int n) {
  const int m = ((phase % (2 * n)) + 2 * n) % (2 * n);
  return m < n ? m : 2 * n - m;
}

std::uint8_t u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

void fill_rect(Frame& f, int x0, int x1, int y0, int y1, std::uint8_t b, std::uint8_t g,
               std::uint8_t r) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, f.width);
  y1 = std::min(y1, f.height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) f.set(x, y, b, g, r);
}

// Bitmask of lanes within `moves` single-lane moves of any lane in `lanes`.
std::uint8_t expand_reach(std::uint8_t lanes, int moves) {
  std::uint8_t s = lanes;
  for (int i = 0; i < moves; ++i)
    s = static_cast<std::uint8_t>((s | (s << 1) | (s >> 1)) & 0b111);
  return s;
}

void validate(const EnvConfig& c) {
  if (c.lane_count != 3)
    throw std::invalid_argument("env: lane_count must be 3 (three discrete actions)");
  if (c.steps_between_rows < 1) throw std::invalid_argument("env: steps_between_rows must be >= 1");
  if (c.step_cap < 1) throw std::invalid_argument("env: step_cap must be >= 1");
  if (c.double_block_prob < 0.0 || c.double_block_prob > 1.0)
    throw std::invalid_argument("env: double_block_prob must lie in [0, 1]");
  // The frame must survive the observation filter: the crop window has to
  // cover at least 160x90 pixels for the downscale-only area resize.
  const CropWindow w = crop_window(c.frame_width, c.frame_height);
  if (w.col_end - w.col_begin < kObservationWidth ||
      w.row_end - w.row_begin < kObservationHeight)
    throw std::invalid_argument(
        "env: frame too small; the cropped region must be at least 160x90 "
        "(needs roughly 267x342 or larger)");
}

}  // namespace

std::vector<std::uint8_t> generate_pattern(const EnvConfig& config) {
  Rng rng(config.pattern_seed);
  const int rows = config.num_rows();
  std::vector<std::uint8_t> pattern(static_cast<std::size_t>(rows), 0);

  // Lanes the car can occupy at the next contact, given it survived so far.
  std::uint8_t reach = expand_reach(0b010, config.steps_between_rows);
  for (int k = 0; k < rows; ++k) {
    for (;;) {
      std::uint8_t mask;
      if (rng.uniform() < config.double_block_prob) {
        const int free = static_cast<int>(rng.uniform_index(3));
        mask = static_cast<std::uint8_t>(0b111 ^ (1 << free));
      } else {
        mask = static_cast<std::uint8_t>(1 << rng.uniform_index(3));
      }
      const std::uint8_t survivors = static_cast<std::uint8_t>(reach & ~mask & 0b111);
      if (survivors != 0) {
        pattern[static_cast<std::size_t>(k)] = mask;
        reach = expand_reach(survivors, config.steps_between_rows);
        break;
      }
    }
  }
  return pattern;
}

LaneEnv::LaneEnv(const EnvConfig& config) : config_(config) {
  validate(config_);
  pattern_ = generate_pattern(config_);
  reset();
}

const Frame& LaneEnv::reset() {
  state_ = EnvState{};
  info_ = StepInfo{};
  frame_ = render(state_, config_, pattern_);
  return frame_;
}

const Frame& LaneEnv::step(Action action) {
  if (state_.terminal) throw std::logic_error("env: step() on a terminal state");
  if (state_.step >= config_.step_cap) throw std::logic_error("env: episode step cap reached");

  const int delta = static_cast<int>(action) - 1;
  const int lane = clamp_lane(state_.lane + delta);
  const int t = state_.step + 1;

  bool collided = false;
  if (t % config_.steps_between_rows == 0) {
    const int row = t / config_.steps_between_rows - 1;
    if (row < config_.num_rows()) {
      if ((pattern_[static_cast<std::size_t>(row)] >> lane) & 1) {
        collided = true;
      } else {
        state_.obstacles_passed = row + 1;
        state_.obstacle_cursor = row + 1;
      }
    }
  }

  state_.lane = lane;
  state_.step = t;
  state_.terminal = collided;
  info_ = StepInfo{collided, state_.obstacles_passed, lane};

  frame_ = collided ? make_game_over_frame(config_) : render(state_, config_, pattern_);
  return frame_;
}

Frame LaneEnv::render(const EnvState& state, const EnvConfig& config,
                      const std::vector<std::uint8_t>& pattern) {
  const int W = config.frame_width, H = config.frame_height;
  const int t = state.step;
  Frame f(W, H);

  const int road_top = H * 160 / 360;
  const int road_bot = H * 320 / 360;
  const int road_left = W / 5;
  const int road_right = W * 4 / 5;

  // Sky: drifting neon gradient, all of it comfortably below the brightness
  // the triangle threshold will select.
  for (int y = 0; y < road_top; ++y) {
    const int lum = 18 + y * 42 / std::max(road_top, 1);
    const int b = lum + tri(t + y / 3, 30) / 2;
    const int g = lum * 2 / 3 + tri(t * 2 + y / 5 + 20, 24) / 3;
    const int r = lum / 2 + tri(t * 3 + y / 7, 36) / 2;
    for (int x = 0; x < W; ++x) {
      // Sparse horizontal shimmer.
      const int s = (x * 7 + y * 13 + t * 5) % 97 < 3 ? 9 : 0;
      f.set(x, y, u8(b + s), u8(g + s), u8(r + s));
    }
  }

  // Ground: road surface inside [road_left, road_right), shoulders outside.
  for (int y = road_top; y < H; ++y) {
    const int depth = (y - road_top) * 20 / std::max(H - road_top, 1);
    for (int x = 0; x < W; ++x) {
      if (x >= road_left && x < road_right) {
        const int lum = 24 + depth + tri(x / 2 + t * 3, 16) / 4;
        f.set(x, y, u8(lum + 6 + tri(t + x / 8, 20) / 3), u8(lum + tri(y + t * 2, 14) / 4),
              u8(lum + 4 + tri(x / 5 + t, 26) / 5));
      } else {
        const int lum = 16 + depth + tri(x / 3 + y / 2 + t, 22) / 3;
        f.set(x, y, u8(lum / 2), u8(lum + 8), u8(lum / 2 + 4));
      }
    }
  }

  // Lane boundaries: scrolling dashes, kept dimmer than sprites.
  for (int i = 1; i < 3; ++i) {
    const int x = road_left + (road_right - road_left) * i / 3;
    for (int y = road_top; y < road_bot; ++y) {
      if (((y + t * 6) / 12) % 2 == 0) {
        for (int dx = -1; dx <= 1; ++dx)
          if (x + dx >= 0 && x + dx < W) f.set(x + dx, y, 86, 88, 84);
      }
    }
  }
  // Road edges: solid lines at the crop boundary columns.
  for (int y = road_top; y < road_bot; ++y) {
    f.set(road_left, y, 78, 82, 76);
    f.set(road_right - 1, y, 78, 82, 76);
  }

  auto lane_center = [&](int lane) { return W * (3 + 2 * lane) / 10; };

  // Upcoming obstacle row, scaled by proximity (d = decision steps until
  // contact, 1 = next step).
  const int R = config.steps_between_rows;
  const int cursor = state.obstacle_cursor;
  if (cursor < static_cast<int>(pattern.size())) {
    const int contact = (cursor + 1) * R;
    const int d = contact - t;  // in [1, R]
    const int span = std::max(R - 1, 1);
    const int u = d - 1;  // 0 = near slot, span = far slot
    const int y0 = H * 241 / 360 + (H * 196 / 360 - H * 241 / 360) * u / span;
    const int y1 = H * 285 / 360 + (H * 212 / 360 - H * 285 / 360) * u / span;
    const int hw = W * 48 / 640 + (W * 27 / 640 - W * 48 / 640) * u / span;
    for (int lane = 0; lane < 3; ++lane) {
      if (!((pattern[static_cast<std::size_t>(cursor)] >> lane) & 1)) continue;
      const int cx = lane_center(lane);
      fill_rect(f, cx - hw, cx + hw, y0, y1, 200, 120, 255);  // bright warning block
      // Dim base shadow just below, for depth.
      fill_rect(f, cx - hw, cx + hw, y1, std::min(y1 + (y1 - y0) / 6, H), 40, 28, 52);
    }
  }

  // Car sprite: solid bright body at the bottom of the crop window.
  {
    const int cx = lane_center(state.lane);
    const int hw = W * 26 / 640;
    const int y0 = H * 252 / 360, y1 = H * 286 / 360;
    fill_rect(f, cx - hw, cx + hw, y0, y1, 240, 235, 90);
  }

  return f;
}

Frame LaneEnv::make_game_over_frame(const EnvConfig& config) {
  const int W = config.frame_width, H = config.frame_height;
  Frame f(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (((x / 8) + (y / 8)) % 2 == 0)
        f.set(x, y, 228, 232, 238);
      else
        f.set(x, y, 248, 246, 250);
    }
  }
  // Dark center band, the "wasted" bar.
  fill_rect(f, 0, W, H * 42 / 100, H * 58 / 100, 40, 35, 45);
  // A few bright pips inside the band so it is not a single gray level.
  for (int x = W / 5; x < W * 4 / 5; x += W / 20)
    fill_rect(f, x, x + W / 64, H * 47 / 100, H * 53 / 100, 250, 250, 250);
  return f;
}

TabularMdp abstract_mdp(const EnvConfig& config) {
  validate(config);
  const std::vector<std::uint8_t> pattern = generate_pattern(config);
  const int cap = config.step_cap;
  const int R = config.steps_between_rows;
  const int rows = config.num_rows();

  TabularMdp mdp;
  mdp.num_states = 3 * (cap + 1);
  mdp.num_actions = kNumActions;
  mdp.start_state = mdp_state(1, 0);
  const std::size_t n = static_cast<std::size_t>(mdp.num_states) * kNumActions;
  mdp.next.assign(n, 0);
  mdp.reward.assign(n, 0.0);
  mdp.done.assign(n, 1);

  for (int t = 0; t <= cap; ++t) {
    for (int lane = 0; lane < 3; ++lane) {
      const int s = mdp_state(lane, t);
      for (int a = 0; a < kNumActions; ++a) {
        const std::size_t i = mdp.idx(s, a);
        if (t >= cap) {  // episode already over; self-loop kept inert
          mdp.next[i] = s;
          continue;
        }
        const int lane2 = clamp_lane(lane + a - 1);
        const int t2 = t + 1;
        bool collided = false;
        if (t2 % R == 0) {
          const int row = t2 / R - 1;
          if (row < rows && ((pattern[static_cast<std::size_t>(row)] >> lane2) & 1))
            collided = true;
        }
        mdp.next[i] = mdp_state(lane2, t2);
        mdp.reward[i] = (!collided && t2 >= R) ? 1.0 : 0.0;
        mdp.done[i] = (collided || t2 >= cap) ? 1 : 0;
      }
    }
  }
  return mdp;
}

}  // namespace neon
