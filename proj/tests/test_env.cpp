#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "neon/env.hpp"
#include "neon/filter.hpp"
#include "neon/mdp.hpp"
#include "neon/rng.hpp"

using neon::Action;
using neon::EnvConfig;
using neon::Frame;
using neon::LaneEnv;
using neon::Rng;

namespace {

EnvConfig small_config(std::uint64_t seed = 7) {
  EnvConfig c;
  c.pattern_seed = seed;
  c.step_cap = 30;
  return c;
}

// Safe-lane action script computed from the pattern array: walk toward the
// nearest free lane of the upcoming row, one move per decision step.
std::vector<Action> safe_script(const EnvConfig& config) {
  const auto pattern = neon::generate_pattern(config);
  const int R = config.steps_between_rows;
  std::vector<Action> script;
  int lane = 1;
  for (int t = 1; t <= config.step_cap; ++t) {
    const int row = (t + R - 1) / R - 1;  // row hit at the next contact step
    int target = lane;
    if (row < static_cast<int>(pattern.size())) {
      const std::uint8_t mask = pattern[static_cast<std::size_t>(row)];
      if ((mask >> lane) & 1) {  // current lane blocked: nearest free lane
        int best_dist = 99;
        for (int l = 0; l < 3; ++l) {
          if (!((mask >> l) & 1) && std::abs(l - lane) < best_dist) {
            best_dist = std::abs(l - lane);
            target = l;
          }
        }
      }
    }
    const int delta = target > lane ? 1 : (target < lane ? -1 : 0);
    script.push_back(static_cast<Action>(delta + 1));
    lane = std::clamp(lane + delta, 0, 2);
  }
  return script;
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  LaneEnv a(small_config()), b(small_config());
  CHECK(a.reset() == b.reset());
  CHECK(a.info().obstacles_passed == 0);
  CHECK_FALSE(a.info().collided);
  CHECK(a.state().lane == 1);  // center start
  CHECK(a.state().step == 0);

  // Two resets of the same instance agree byte for byte.
  LaneEnv c(small_config());
  const Frame first = c.reset();
  c.step(Action::Left);
  CHECK(c.reset() == first);
}

TEST_CASE("different seeds give different obstacle patterns") {
  const auto p1 = neon::generate_pattern(small_config(1));
  const auto p2 = neon::generate_pattern(small_config(2));
  CHECK(p1 != p2);
}

TEST_CASE("every pattern row leaves at least one free lane") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    EnvConfig c = small_config(seed);
    c.step_cap = 120;
    for (const std::uint8_t mask : neon::generate_pattern(c)) {
      CHECK((mask & 0b111) != 0b111);
      CHECK(mask != 0);
    }
  }
}

TEST_CASE("pattern stays survivable even with one step between rows") {
  // steps_between_rows = 1 exercises the reachability constraint: the free
  // lane must be adjacent to a survivable lane.
  EnvConfig c = small_config(11);
  c.steps_between_rows = 1;
  c.step_cap = 40;
  const auto pattern = neon::generate_pattern(c);
  std::uint8_t reach = 0b010;
  for (const std::uint8_t mask : pattern) {
    reach = static_cast<std::uint8_t>((reach | (reach << 1) | (reach >> 1)) & 0b111);
    reach &= static_cast<std::uint8_t>(~mask & 0b111);
    CHECK(reach != 0);
  }
}

TEST_CASE("left at lane 0 stays clamped") {
  EnvConfig c = small_config();
  LaneEnv env(c);
  env.reset();
  env.step(Action::Left);
  CHECK(env.state().lane == 0);
  env.step(Action::Left);
  CHECK(env.state().lane == 0);
}

TEST_CASE("scripted safe-lane sequence survives the step cap") {
  const EnvConfig c = small_config(13);
  LaneEnv env(c);
  env.reset();
  for (const Action a : safe_script(c)) {
    env.step(a);
    CHECK_FALSE(env.info().collided);
  }
  CHECK(env.state().step == c.step_cap);
  CHECK_FALSE(env.terminal());
  CHECK(env.episode_over());
  CHECK(env.info().obstacles_passed == c.num_rows());
  CHECK_THROWS_AS(env.step(Action::NoMove), std::logic_error);
}

TEST_CASE("entering an occupied lane at contact is terminal with the game-over frame") {
  const EnvConfig c = small_config(17);
  const auto pattern = neon::generate_pattern(c);
  const int R = c.steps_between_rows;

  // Steer into an occupied lane of row 0 at its contact step.
  int bad_lane = 0;
  while (!((pattern[0] >> bad_lane) & 1)) ++bad_lane;

  LaneEnv env(c);
  env.reset();
  int lane = 1;
  Frame last;
  for (int t = 1; t <= R; ++t) {
    int delta = 0;
    if (t == R) {
      delta = bad_lane > lane ? 1 : (bad_lane < lane ? -1 : 0);
    } else if (std::abs(bad_lane - lane) > R - t) {  // close the gap early
      delta = bad_lane > lane ? 1 : -1;
    }
    last = env.step(static_cast<Action>(delta + 1));
    lane = std::clamp(lane + delta, 0, 2);
  }
  CHECK(env.state().lane == bad_lane);
  CHECK(env.terminal());
  CHECK(env.info().collided);
  CHECK(env.state().step == R);

  // The emitted frame is the canonical game-over screen, byte for byte.
  CHECK(last == env.game_over_frame());
  CHECK_THROWS_AS(env.step(Action::NoMove), std::logic_error);
}

TEST_CASE("game_over_frame is canonical and far from in-play frames") {
  const EnvConfig c = small_config(19);
  const Frame go1 = LaneEnv::make_game_over_frame(c);
  const Frame go2 = LaneEnv::make_game_over_frame(c);
  CHECK(go1 == go2);
  const neon::Histogram go_hist = neon::gray_histogram(go1);
  CHECK(neon::bhattacharyya(go_hist, go_hist) == doctest::Approx(0.0));

  // 500 in-play frames sampled across episodes of a random walker: none come
  // near the detection threshold, and all clear the 0.5 margin.
  Rng rng(23);
  EnvConfig cc = small_config(19);
  cc.step_cap = 60;
  LaneEnv env(cc);
  int checked = 0;
  while (checked < 500) {
    env.reset();
    double d0 = neon::bhattacharyya(neon::gray_histogram(env.reset()), go_hist);
    CHECK(d0 > 0.5);
    ++checked;
    while (!env.episode_over() && checked < 500) {
      const Frame& f = env.step(static_cast<Action>(rng.uniform_index(3)));
      if (env.terminal()) break;  // that frame is the game-over screen
      const double d = neon::bhattacharyya(neon::gray_histogram(f), go_hist);
      CHECK(d > 0.5);
      ++checked;
    }
  }
}

TEST_CASE("render is a pure function and consecutive frames differ") {
  const EnvConfig c = small_config(29);
  const auto pattern = neon::generate_pattern(c);
  neon::EnvState s;
  s.lane = 1;
  s.step = 4;
  s.obstacle_cursor = 1;
  const Frame f1 = LaneEnv::render(s, c, pattern);
  const Frame f2 = LaneEnv::render(s, c, pattern);
  CHECK(f1 == f2);

  neon::EnvState s2 = s;
  s2.step = 5;
  CHECK_FALSE(LaneEnv::render(s2, c, pattern) == f1);
}

TEST_CASE("an adjacent obstacle changes at least 1% of observation pixels") {
  const EnvConfig c = small_config(31);
  neon::EnvState s;
  s.lane = 1;
  s.step = 2;             // next contact at step 3: proximity d = 1
  s.obstacle_cursor = 0;
  const std::vector<std::uint8_t> with{0b011};  // obstacles in lanes 0 and 1
  const std::vector<std::uint8_t> without{0b000};

  const neon::Observation a = neon::preprocess(LaneEnv::render(s, c, with));
  const neon::Observation b = neon::preprocess(LaneEnv::render(s, c, without));
  int differing = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    if (a.v[i] != b.v[i]) ++differing;
  CHECK(differing >= static_cast<int>(a.v.size()) / 100);
}

TEST_CASE("full determinism: seed plus actions give identical frame sequences") {
  const EnvConfig c = small_config(37);
  Rng rng(41);
  std::vector<Action> actions;
  for (int i = 0; i < c.step_cap; ++i)
    actions.push_back(static_cast<Action>(rng.uniform_index(3)));

  auto run = [&](std::vector<Frame>& frames) {
    LaneEnv env(c);
    frames.push_back(env.reset());
    for (const Action a : actions) {
      if (env.episode_over()) break;
      frames.push_back(env.step(a));
    }
  };
  std::vector<Frame> run1, run2;
  run(run1);
  run(run2);
  CHECK(run1.size() == run2.size());
  for (std::size_t i = 0; i < run1.size(); ++i) CHECK(run1[i] == run2[i]);
}

TEST_CASE("ground-truth collision flag iff the game-over frame is emitted") {
  const EnvConfig c = small_config(43);
  const Frame go = LaneEnv::make_game_over_frame(c);
  Rng rng(47);
  LaneEnv env(c);
  for (int episode = 0; episode < 12; ++episode) {
    env.reset();
    while (!env.episode_over()) {
      const Frame& f = env.step(static_cast<Action>(rng.uniform_index(3)));
      CHECK(env.info().collided == (f == go));
    }
  }
}

TEST_CASE("invalid configs are rejected") {
  EnvConfig c = small_config();
  c.lane_count = 2;
  CHECK_THROWS_AS(LaneEnv{c}, std::invalid_argument);

  EnvConfig tiny = small_config();
  tiny.frame_width = 200;
  tiny.frame_height = 100;
  CHECK_THROWS_AS(LaneEnv{tiny}, std::invalid_argument);

  EnvConfig bad = small_config();
  bad.steps_between_rows = 0;
  CHECK_THROWS_AS(LaneEnv{bad}, std::invalid_argument);
}

TEST_CASE("abstract MDP state count is 3 x (rows + 1) at one step per row") {
  EnvConfig c = small_config(53);
  c.steps_between_rows = 1;
  c.step_cap = 20;  // 20 rows, one per step
  const neon::TabularMdp mdp = neon::abstract_mdp(c);
  CHECK(mdp.num_states == 3 * (c.num_rows() + 1));
  CHECK(mdp.num_actions == 3);
  CHECK(mdp.start_state == neon::mdp_state(1, 0));
}

TEST_CASE("co-simulation: pixel env trajectories match the abstract MDP") {
  const EnvConfig c = small_config(59);
  const neon::TabularMdp mdp = neon::abstract_mdp(c);
  Rng rng(61);

  for (int episode = 0; episode < 20; ++episode) {
    LaneEnv env(c);
    env.reset();
    int s = mdp.start_state;
    bool mdp_done = false;
    while (!env.episode_over()) {
      const int a = static_cast<int>(rng.uniform_index(3));
      REQUIRE_FALSE(mdp_done);
      env.step(static_cast<Action>(a));
      const std::size_t i = mdp.idx(s, a);
      s = mdp.next[i];
      mdp_done = mdp.done[i] != 0;

      CHECK(s == neon::mdp_state(env.state().lane, env.state().step));
      CHECK(mdp.done[i] == (env.episode_over() ? 1 : 0));
      if (env.terminal()) CHECK(mdp.reward[i] == 0.0);
    }
    CHECK(mdp_done);
  }
}

TEST_CASE("value iteration on the abstract MDP reaches the survival maximum") {
  // With gamma = 1 the optimal return is one reward per step from the first
  // contact to the cap: cap - R + 1.
  const EnvConfig c = small_config(67);
  const neon::TabularMdp mdp = neon::abstract_mdp(c);
  const auto vi = neon::value_iteration(mdp, 1.0, 1e-12);
  CHECK(vi.values[static_cast<std::size_t>(mdp.start_state)] ==
        doctest::Approx(c.step_cap - c.steps_between_rows + 1).epsilon(1e-12));
}
