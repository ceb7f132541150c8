#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neon/dqn.hpp"
#include "neon/env.hpp"
#include "neon/filter.hpp"
#include "neon/image.hpp"

namespace neon {

// Full training/eval configuration. Defaults are the reference training
// setup (lr 1e-3, minibatch 128, replay 30000, 4000 episodes); the desk
// profile shrinks the run to something a laptop CPU finishes in minutes.
struct RunConfig {
  EnvConfig env;

  double learning_rate = 1e-3;
  double rms_rho = 0.99;
  double rms_eps = 1e-8;
  int minibatch = 128;
  int buffer_capacity = 30000;
  int episodes = 4000;
  double gamma = 0.99;
  double tau = 0.005;

  // epsilon(step) = eps_floor + eps_scale * exp(-step / eps_decay)
  double eps_floor = 0.05;
  double eps_scale = 0.95;
  double eps_decay = 20000.0;

  double noise_p = 0.0;   // salt & pepper fraction on the observation path
  int train_every = 1;    // env steps per train_step
  int checkpoint_every = 500;  // episodes
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 0;        // 0 = hardware default

  QNetworkConfig net;

  double epsilon_at(std::int64_t step) const;
};

RunConfig desk_profile();   // 600 episodes, small course, minutes on CPU
RunConfig paper_profile();  // 4000 episodes, long course

// Applies "key = value" overrides; see README for the key list. Unknown keys
// and malformed values are rejected.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);
RunConfig load_config_file(const std::string& path, RunConfig base);

struct EpisodeMetrics {
  int episode = 0;
  double total_reward = 0.0;
  int steps = 0;          // decision steps survived
  double mean_loss = 0.0; // over this episode's train steps (0 if none)
  double epsilon_end = 0.0;
  double wall_seconds = 0.0;  // excluded from metrics.csv (not deterministic)
};

// Trailing mean over min(window, index+1) entries.
std::vector<double> moving_average(const std::vector<double>& series, int window = 25);

// Reward and termination from pixels alone: the game-over histogram check
// decides termination (reward 0); otherwise +1 once the first obstacle row
// is behind the car (tracked by the decision-step count against the row
// schedule), else 0.
std::pair<double, bool> pixel_reward(const Frame& frame, int steps_done,
                                     int steps_between_rows,
                                     const Histogram& game_over_histogram);

struct TrainResult {
  std::vector<EpisodeMetrics> metrics;
  std::string metrics_csv;
  std::string final_checkpoint;
};

// Fig-1 wiring: env -> filter -> agent, rewards from pixels, experience
// replay, soft target updates. Writes metrics.csv (deterministic columns),
// timing.csv, and periodic checkpoints under config.out_dir.
TrainResult run_training(const RunConfig& config);

struct EvalLevel {
  double noise_p = 0.0;
  std::vector<double> rewards;       // per episode
  std::vector<double> moving_avg;    // window 25
  double mean_reward = 0.0;
};

struct EvalResult {
  std::vector<EvalLevel> levels;
  std::string csv_path;
};

// Greedy-policy evaluation of a checkpoint under salt & pepper noise applied
// to the observation path, 100 episodes per level by default. Episodes run
// in parallel and are merged by index, so results are thread-count
// independent.
EvalResult run_eval(const std::string& checkpoint_path, const RunConfig& config,
                    const std::vector<double>& noise_levels = {0.0, 0.004, 0.01, 0.10, 0.25},
                    int episodes = 100);

struct BaselineResult {
  double empirical_mean = 0.0;   // uniform-random policy, pixel rewards
  double oracle_expected = 0.0;  // exact absorption computation on the MDP
  std::vector<double> rewards;
};

// Random policy (epsilon pinned to 1, no learning) against the exact
// absorption oracle on the abstract MDP.
BaselineResult run_baseline(const RunConfig& config, int episodes);

void write_metrics_csv(const std::string& path, const std::vector<EpisodeMetrics>& metrics);

}  // namespace neon
