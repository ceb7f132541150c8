#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <span>
#include <cmath>
#include <numeric>

#include "neon/dqn.hpp"
#include "neon/env.hpp"
#include "neon/mdp.hpp"
#include "neon/rng.hpp"

using neon::FTensor;
using neon::QNetwork;
using neon::QNetworkConfig;
using neon::ReplayBuffer;
using neon::Rng;
using neon::Tensor;
using neon::Transition;

namespace {

// Small input keeps unit-test forward passes cheap; the conv stack needs at
// least 29 pixels per axis.
QNetworkConfig tiny_net() {
  QNetworkConfig cfg;
  cfg.input_height = 32;
  cfg.input_width = 32;
  return cfg;
}

FTensor random_input(const QNetworkConfig& cfg, int n, Rng& rng) {
  FTensor t({n, 1, cfg.input_height, cfg.input_width});
  for (float& v : t.data) v = static_cast<float>(rng.uniform_index(3)) - 1.0f;  // {-1,0,1}
  return t;
}

void zero_head(QNetwork& net) {
  for (auto& [name, tensor] : net.named_state())
    if (name == "fc.weight" || name == "fc.bias")
      std::fill(tensor->data.begin(), tensor->data.end(), 0.0f);
}

std::vector<std::int8_t> diff_from(const FTensor& input) {
  std::vector<std::int8_t> v(input.data.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int8_t>(input.data[i]);
  return v;
}

}  // namespace

TEST_CASE("q_forward with a zeroed head returns all zeros") {
  Rng rng(3);
  QNetwork net(tiny_net(), rng);
  zero_head(net);
  FTensor x = random_input(tiny_net(), 4, rng);
  const FTensor q = net.forward(x, /*training=*/false);
  CHECK(q.shape == std::vector<std::int64_t>{4, 3});
  for (double v : q.data) CHECK(v == 0.0);
}

TEST_CASE("q_forward eval mode is deterministic") {
  Rng rng(5);
  QNetwork net(tiny_net(), rng);
  FTensor x = random_input(tiny_net(), 2, rng);
  const FTensor a = net.forward(x, false);
  const FTensor b = net.forward(x, false);
  CHECK(a.data == b.data);
}

TEST_CASE("q_forward output shape is N x 3 across batch sizes") {
  Rng rng(7);
  QNetwork net(tiny_net(), rng);
  for (int n : {1, 2, 5, 32}) {
    FTensor x = random_input(tiny_net(), n, rng);
    const FTensor q = net.forward(x, false);
    CHECK(q.shape == std::vector<std::int64_t>{n, 3});
  }
}

TEST_CASE("q_forward rejects a wrong input shape") {
  Rng rng(9);
  QNetwork net(tiny_net(), rng);
  FTensor bad({1, 1, 31, 32});
  CHECK_THROWS_AS(net.forward(bad, false), std::invalid_argument);
  FTensor bad2({1, 2, 32, 32});
  CHECK_THROWS_AS(net.forward(bad2, false), std::invalid_argument);
}

TEST_CASE("select_action greedy, tie-break, and exploration frequencies") {
  Rng rng(11);
  const std::array<double, 3> q1{1.0, 3.0, 2.0};
  CHECK(neon::select_action(std::span<const double>(q1), 0.0, rng) == 1);

  const std::array<double, 3> ties{5.0, 5.0, 5.0};
  CHECK(neon::select_action(std::span<const double>(ties), 0.0, rng) == 0);  // lowest index wins

  std::array<int, 3> counts{};
  for (int i = 0; i < 3000; ++i) ++counts[static_cast<std::size_t>(
      neon::select_action(std::span<const double>(q1), 1.0, rng))];
  for (int c : counts) {
    const double f = c / 3000.0;
    CHECK(f > 0.28);
    CHECK(f < 0.39);
  }
}

TEST_CASE("select_action with epsilon 0 is argmax-shift invariant") {
  Rng r1(13), r2(13);
  const std::array<double, 3> q{0.3, -1.2, 0.9};
  std::array<double, 3> shifted{};
  for (std::size_t i = 0; i < 3; ++i) shifted[i] = q[i] + 123.456;
  CHECK(neon::select_action(std::span<const double>(q), 0.0, r1) ==
        neon::select_action(std::span<const double>(shifted), 0.0, r2));
}

TEST_CASE("compute_targets masks terminals and bootstraps otherwise") {
  Rng rng(17);
  QNetwork target(tiny_net(), rng);
  zero_head(target);
  // Constant head: Q = bias for any input.
  for (auto& [name, tensor] : target.named_state())
    if (name == "fc.bias") tensor->data = {0.5f, 0.2f, 0.0f};

  FTensor s = random_input(tiny_net(), 1, rng);
  Transition terminal{neon::pack_diff(diff_from(s)), neon::pack_diff(diff_from(s)), 0, 0.0f,
                      true};
  Transition live{neon::pack_diff(diff_from(s)), neon::pack_diff(diff_from(s)), 0, 1.0f, false};

  const std::array<const Transition*, 2> batch{&terminal, &live};
  const std::vector<double> y = neon::compute_targets(batch, target, 0.99);
  CHECK(y[0] == doctest::Approx(0.0));            // terminal with r = 0
  CHECK(y[1] == doctest::Approx(1.495).epsilon(1e-12));  // 1 + 0.99 * 0.5

  const std::vector<double> myopic = neon::compute_targets(batch, target, 0.0);
  CHECK(myopic[1] == doctest::Approx(1.0));
}

TEST_CASE("soft_update blends all state including running statistics") {
  Rng rng(19);
  QNetwork online(tiny_net(), rng);
  QNetwork target(tiny_net(), rng);

  // tau = 1 copies online exactly.
  QNetwork t1 = target;
  neon::soft_update(online, t1, 1.0);
  for (std::size_t i = 0; i < online.named_state().size(); ++i)
    CHECK(t1.named_state()[i].second->data == online.named_state()[i].second->data);

  // tau = 0 leaves the target untouched.
  QNetwork t0 = target;
  neon::soft_update(online, t0, 0.0);
  for (std::size_t i = 0; i < target.named_state().size(); ++i)
    CHECK(t0.named_state()[i].second->data == target.named_state()[i].second->data);
}

TEST_CASE("soft_update hand value and contraction property") {
  Rng rng(23);
  QNetwork online(tiny_net(), rng);
  QNetwork target(tiny_net(), rng);
  auto online_state = online.named_state();
  auto target_state = target.named_state();
  for (auto& [name, tensor] : online_state)
    std::fill(tensor->data.begin(), tensor->data.end(), 2.0);
  for (auto& [name, tensor] : target_state)
    std::fill(tensor->data.begin(), tensor->data.end(), 0.0f);

  neon::soft_update(online, target, 0.005);
  for (auto& [name, tensor] : target_state)
    for (float v : tensor->data) CHECK(v == doctest::Approx(0.01).epsilon(1e-6));

  // Elementwise contraction: d_new - s = (1 - tau) * (d_old - s).
  QNetwork a(tiny_net(), rng), b(tiny_net(), rng);
  auto as = a.named_state();
  auto bs = b.named_state();
  std::vector<std::vector<float>> before;
  for (auto& [name, tensor] : bs) before.push_back(tensor->data);
  neon::soft_update(a, b, 0.25);
  for (std::size_t i = 0; i < bs.size(); ++i)
    for (std::size_t j = 0; j < bs[i].second->data.size(); ++j) {
      const double s = as[i].second->data[j];
      CHECK(bs[i].second->data[j] - s ==
            doctest::Approx(0.75 * (before[i][j] - s)).epsilon(1e-4));
    }
}

TEST_CASE("replay buffer overwrites oldest first") {
  ReplayBuffer buffer(4);
  for (int i = 0; i < 6; ++i) {
    Transition t;
    t.reward = static_cast<float>(i);
    buffer.add(t);
  }
  CHECK(buffer.size() == 4);
  std::vector<float> rewards;
  for (std::size_t i = 0; i < buffer.size(); ++i) rewards.push_back(buffer.at(i).reward);
  std::sort(rewards.begin(), rewards.end());
  CHECK(rewards == std::vector<float>{2.0f, 3.0f, 4.0f, 5.0f});
}

TEST_CASE("pack_diff round-trips all three values") {
  Rng rng(29);
  std::vector<std::int8_t> diff(517);
  for (auto& v : diff) v = static_cast<std::int8_t>(static_cast<int>(rng.uniform_index(3)) - 1);
  const neon::PackedDiff packed = neon::pack_diff(diff);
  std::vector<float> out(diff.size());
  neon::unpack_diff(packed, out.data());
  for (std::size_t i = 0; i < diff.size(); ++i)
    CHECK(out[i] == static_cast<float>(diff[i]));
}

TEST_CASE("train_step returns no-op below the minibatch size") {
  Rng rng(31);
  QNetwork online(tiny_net(), rng);
  QNetwork target = online;
  neon::FRmsprop opt(1e-3);
  ReplayBuffer buffer(64);
  Transition t;
  t.state = neon::pack_diff(std::vector<std::int8_t>(32 * 32, 0));
  t.next_state = t.state;
  for (int i = 0; i < 7; ++i) buffer.add(t);
  Rng sample_rng(33);
  CHECK_FALSE(neon::train_step(online, target, buffer, opt, sample_rng, 8, 0.99).has_value());
  buffer.add(t);
  CHECK(neon::train_step(online, target, buffer, opt, sample_rng, 8, 0.99).has_value());
}

TEST_CASE("train_step drives Q toward the reward on a repeated terminal transition") {
  Rng rng(37);
  const QNetworkConfig cfg = tiny_net();
  QNetwork online(cfg, rng);
  QNetwork target = online;
  neon::FRmsprop opt(1e-3);
  ReplayBuffer buffer(8);

  FTensor s = random_input(cfg, 1, rng);
  Transition t{neon::pack_diff(diff_from(s)), neon::pack_diff(diff_from(s)), 1, 1.0f, true};
  for (int i = 0; i < 8; ++i) buffer.add(t);  // buffer of one repeated transition

  Rng sample_rng(39);
  const int minibatch = 8;

  double prev_q = -1e9;
  double first_gap = 0.0, last_gap = 0.0;
  bool monotone = true;
  for (int step = 0; step < 200; ++step) {
    // Probe the train-mode Q the coming update will see; the batch is the
    // same single transition, so batch statistics are identical.
    FTensor batch({minibatch, 1, cfg.input_height, cfg.input_width});
    for (int i = 0; i < minibatch; ++i)
      std::copy(s.data.begin(), s.data.end(), batch.data.begin() + i * s.size());
    const FTensor q_pre = online.forward(batch, /*training=*/true);
    const double q = static_cast<double>(q_pre.data[1]);

    const auto loss = neon::train_step(online, target, buffer, opt, sample_rng, minibatch, 0.99);
    REQUIRE(loss.has_value());
    CHECK(*loss >= 0.0);
    CHECK(*loss == doctest::Approx((1.0 - q) * (1.0 - q)).epsilon(1e-9));

    if (step == 0) first_gap = std::fabs(1.0 - q);
    last_gap = std::fabs(1.0 - q);
    if (q < prev_q - 1e-9 && last_gap > 0.05) monotone = false;
    prev_q = q;
  }
  CHECK(monotone);                     // approach is monotone until very close
  CHECK(last_gap < 0.75 * first_gap);  // and makes clear progress toward 1
}

TEST_CASE("train_step leaves non-selected action heads with zero gradient") {
  Rng rng(41);
  QNetwork online(tiny_net(), rng);
  QNetwork target = online;
  neon::FRmsprop opt(1e-3);
  ReplayBuffer buffer(16);
  FTensor s = random_input(tiny_net(), 1, rng);
  Transition t{neon::pack_diff(diff_from(s)), neon::pack_diff(diff_from(s)), 2, 0.5f, true};
  for (int i = 0; i < 16; ++i) buffer.add(t);

  Rng sample_rng(43);
  REQUIRE(neon::train_step(online, target, buffer, opt, sample_rng, 8, 0.99).has_value());

  for (auto& [name, tensor] : online.named_state()) {
    if (name != "fc.bias") continue;
    REQUIRE(tensor->grad.size() == 3);
    CHECK(tensor->grad[0] == 0.0f);  // only action 2 was taken
    CHECK(tensor->grad[1] == 0.0f);
    CHECK(tensor->grad[2] != 0.0f);
  }
}

TEST_CASE("tabular_q_update hand cases") {
  neon::TabularQ q(4, 3, 0.1, 0.99);
  neon::tabular_q_update(q, 0, 1, 1.0, 2, false);  // all-zero Q: delta = r
  CHECK(q.at(0, 1) == doctest::Approx(0.1));

  // delta = 0 leaves the table unchanged: Q(s,a) = r + gamma*max Q(s') already.
  neon::TabularQ q2(2, 3, 0.5, 0.5);
  q2.at(1, 0) = 2.0;
  q2.at(0, 0) = 1.0 + 0.5 * 2.0;
  neon::tabular_q_update(q2, 0, 0, 1.0, 1, false);
  CHECK(q2.at(0, 0) == doctest::Approx(2.0));

  // Terminal ignores the successor.
  neon::TabularQ q3(2, 3, 1.0, 0.99);
  q3.at(1, 2) = 100.0;
  neon::tabular_q_update(q3, 0, 0, 3.0, 1, true);
  CHECK(q3.at(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("value_iteration basics") {
  // Zero-reward MDP: all values 0.
  neon::TabularMdp zero;
  zero.num_states = 3;
  zero.num_actions = 2;
  zero.next = {1, 2, 2, 0, 0, 1};
  zero.reward.assign(6, 0.0);
  zero.done.assign(6, 0);
  const auto vz = neon::value_iteration(zero, 0.9);
  for (double v : vz.values) CHECK(v == doctest::Approx(0.0));

  // Single state, self-loop reward 1, gamma 0.99: value = 1/(1-gamma) = 100.
  neon::TabularMdp loop;
  loop.num_states = 1;
  loop.num_actions = 1;
  loop.next = {0};
  loop.reward = {1.0};
  loop.done = {0};
  const auto vl = neon::value_iteration(loop, 0.99, 1e-10);
  CHECK(vl.values[0] == doctest::Approx(100.0).epsilon(1e-7));
  CHECK(neon::bellman_residual(loop, vl.values, 0.99) <= 1e-10);
}

TEST_CASE("tabular Q-learning reaches the value-iteration policy exactly") {
  neon::EnvConfig cfg;
  cfg.pattern_seed = 71;
  cfg.steps_between_rows = 1;  // contact every step: 3*(rows+1) states
  cfg.step_cap = 15;
  cfg.double_block_prob = 0.35;
  const neon::TabularMdp mdp = neon::abstract_mdp(cfg);

  const auto vi = neon::value_iteration(mdp, 0.99, 1e-10);
  CHECK(neon::bellman_residual(mdp, vi.values, 0.99) <= 1e-10);

  // Epsilon-greedy at the exploration-maximal setting (epsilon = 1, the
  // off-policy regime) with round-robin exploring starts, so every
  // state-action pair collects the ~60 visits that alpha = 0.5 needs to
  // settle onto its float fixed point. Exact ties then resolve identically
  // to value iteration's lowest-index rule.
  neon::TabularQ q(mdp.num_states, mdp.num_actions, 0.5, 0.99);
  Rng rng(73);
  std::int64_t updates = 0;
  int start = 0;
  while (updates < 50000) {
    int s = start;
    start = (start + 1) % mdp.num_states;
    while (updates < 50000) {
      if (s / 3 >= cfg.step_cap) break;  // past-cap states have no live moves
      const int a = rng.uniform() < 1.0 ? static_cast<int>(rng.uniform_index(3)) : q.greedy(s);
      const std::size_t i = mdp.idx(s, a);
      neon::tabular_q_update(q, s, a, mdp.reward[i], mdp.next[i], mdp.done[i] != 0);
      ++updates;
      if (mdp.done[i]) break;
      s = mdp.next[i];
    }
  }

  int mismatches = 0;
  for (int s = 0; s < mdp.num_states; ++s)
    if (q.greedy(s) != vi.policy[static_cast<std::size_t>(s)]) ++mismatches;
  CHECK(mismatches == 0);
}

TEST_CASE("discounted return telescopes and is bounded by the optimal value") {
  neon::EnvConfig cfg;
  cfg.pattern_seed = 79;
  cfg.step_cap = 30;
  const neon::TabularMdp mdp = neon::abstract_mdp(cfg);
  const double gamma = 0.99;
  const auto vi = neon::value_iteration(mdp, gamma, 1e-12);

  Rng rng(83);
  for (int episode = 0; episode < 50; ++episode) {
    double ret_running = 0.0, discount = 1.0;
    std::vector<double> rewards;
    int s = mdp.start_state;
    for (;;) {
      const int a = static_cast<int>(rng.uniform_index(3));
      const std::size_t i = mdp.idx(s, a);
      rewards.push_back(mdp.reward[i]);
      ret_running += discount * mdp.reward[i];
      discount *= gamma;
      if (mdp.done[i]) break;
      s = mdp.next[i];
    }
    double ret_powers = 0.0;
    for (std::size_t k = 0; k < rewards.size(); ++k)
      ret_powers += std::pow(gamma, static_cast<double>(k)) * rewards[k];
    CHECK(ret_running == doctest::Approx(ret_powers).epsilon(1e-10));
    CHECK(ret_running <= vi.values[static_cast<std::size_t>(mdp.start_state)] + 1e-9);
  }
}

TEST_CASE("agent snapshot and restore round-trip") {
  Rng rng(89);
  QNetwork online(tiny_net(), rng);
  QNetwork target(tiny_net(), rng);
  neon::FRmsprop opt(1e-3);

  // Take one real step so the optimizer has state.
  ReplayBuffer buffer(8);
  FTensor s = random_input(tiny_net(), 1, rng);
  Transition t{neon::pack_diff(diff_from(s)), neon::pack_diff(diff_from(s)), 0, 1.0f, true};
  for (int i = 0; i < 8; ++i) buffer.add(t);
  Rng sample_rng(91);
  REQUIRE(neon::train_step(online, target, buffer, opt, sample_rng, 8, 0.99).has_value());

  const neon::NamedTensors snap = neon::snapshot_agent(online, target, opt, 12345);
  const neon::AgentSnapshot back = neon::restore_agent(snap, tiny_net());
  CHECK(back.global_step == 12345);

  for (std::size_t i = 0; i < online.named_state().size(); ++i)
    CHECK(back.online.named_state()[i].second->data == online.named_state()[i].second->data);
  for (std::size_t i = 0; i < target.named_state().size(); ++i)
    CHECK(back.target.named_state()[i].second->data == target.named_state()[i].second->data);
  REQUIRE(back.optimizer_sq_avg.size() == opt.state().size());
  for (std::size_t i = 0; i < opt.state().size(); ++i)
    CHECK(back.optimizer_sq_avg[i] == opt.state()[i]);

  // Restored online net computes identical Q-values.
  QNetwork restored = back.online;
  FTensor probe = random_input(tiny_net(), 2, rng);
  QNetwork original = online;
  CHECK(restored.forward(probe, false).data == original.forward(probe, false).data);
}
