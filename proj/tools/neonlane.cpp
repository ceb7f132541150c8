// Command-line front end: train a DQN agent on the lane-dodging simulator,
// evaluate checkpoints under sensor noise, run the random-policy baseline,
// and expose the observation filter for single images.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "neon/env.hpp"
#include "neon/filter.hpp"
#include "neon/harness.hpp"
#include "neon/image.hpp"
#include "neon/rng.hpp"

namespace {

struct CommonOpts {
  std::string profile = "desk";
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<double> noise;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--profile", opts.profile, "Run profile: desk (default) or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--config", opts.config_file, "Key-value config file (see README)");
  cmd->add_option("--set", opts.overrides, "Extra overrides, key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("--episodes", opts.episodes, "Episode count");
  cmd->add_option("--noise", opts.noise, "Salt & pepper fraction on the observation path");
  cmd->add_option("--out", opts.out, "Output directory");
  cmd->add_option("--threads", opts.threads, "Worker threads (0 = hardware)");
}

neon::RunConfig build_config(const CommonOpts& opts) {
  neon::RunConfig config =
      opts.profile == "paper" ? neon::paper_profile() : neon::desk_profile();
  if (!opts.config_file.empty()) config = neon::load_config_file(opts.config_file, config);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    neon::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) config.seed = *opts.seed;
  if (opts.episodes) config.episodes = *opts.episodes;
  if (opts.noise) config.noise_p = *opts.noise;
  if (opts.out) config.out_dir = *opts.out;
  if (opts.threads) config.threads = *opts.threads;
  return config;
}

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> levels;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) levels.push_back(std::stod(tok));
  if (levels.empty()) throw CLI::ValidationError("--noise-levels", "no levels given");
  return levels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neonlane: pixels-only DQN workbench on a synthetic lane-dodging game"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  std::string dump_dir;
  auto* train = app.add_subcommand("train", "Train an agent; writes metrics.csv + checkpoints");
  add_common(train, train_opts);
  train->add_option("--dump-frames", dump_dir,
                    "Also dump the first episode's frames as PPM into this directory");

  CommonOpts eval_opts;
  std::string checkpoint;
  std::string levels_csv = "0,0.004,0.01,0.10,0.25";
  int eval_episodes = 100;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint under noise");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--noise-levels", levels_csv, "Comma-separated noise fractions");
  eval->add_option("--eval-episodes", eval_episodes, "Episodes per noise level");

  std::string in_path, out_path, gray_path;
  auto* prep = app.add_subcommand("preprocess", "Run the observation filter on one PPM image");
  prep->add_option("--in", in_path, "Input frame (PPM)")->required();
  prep->add_option("--out", out_path, "Output observation (PGM)")->required();
  prep->add_option("--gray", gray_path, "Also write the cropped grayscale stage (PGM)");

  CommonOpts base_opts;
  int base_episodes = 1000;
  auto* baseline = app.add_subcommand("baseline", "Random policy vs the exact absorption oracle");
  add_common(baseline, base_opts);
  baseline->add_option("--baseline-episodes", base_episodes, "Rollout count");

  CommonOpts frames_opts;
  int frame_count = 8;
  auto* frames = app.add_subcommand("frames", "Dump simulator frames (random policy) as PPM");
  add_common(frames, frames_opts);
  frames->add_option("--count", frame_count, "Frames to dump");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const neon::RunConfig config = build_config(train_opts);
      if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        neon::LaneEnv env(config.env);
        neon::Rng rng(config.seed);
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%04d.ppm", 0);
        neon::save_ppm(dump_dir + "/" + name, env.reset());
        for (int t = 1; t <= config.env.step_cap && !env.episode_over(); ++t) {
          const neon::Frame& f =
              env.step(static_cast<neon::Action>(rng.uniform_index(3)));
          std::snprintf(name, sizeof(name), "frame_%04d.ppm", t);
          neon::save_ppm(dump_dir + "/" + name, f);
        }
        neon::save_ppm(dump_dir + "/game_over.ppm", env.game_over_frame());
      }
      const neon::TrainResult result = neon::run_training(config);
      const auto rewards = [&] {
        std::vector<double> r;
        for (const auto& m : result.metrics) r.push_back(m.total_reward);
        return r;
      }();
      const auto ma = neon::moving_average(rewards);
      std::cout << "episodes: " << result.metrics.size() << "\n"
                << "metrics:  " << result.metrics_csv << "\n"
                << "final checkpoint: " << result.final_checkpoint << "\n";
      if (!ma.empty())
        std::cout << "final 25-episode moving average reward: " << ma.back() << "\n";
    } else if (*eval) {
      const neon::RunConfig config = build_config(eval_opts);
      const neon::EvalResult result =
          neon::run_eval(checkpoint, config, parse_levels(levels_csv), eval_episodes);
      std::cout << "eval written to " << result.csv_path << "\n";
      for (const auto& level : result.levels)
        std::cout << "  noise " << level.noise_p << ": mean reward " << level.mean_reward
                  << "\n";
    } else if (*prep) {
      const neon::Frame frame = neon::load_ppm(in_path);
      if (!gray_path.empty())
        neon::save_pgm(gray_path, neon::crop(neon::to_grayscale(frame)));
      neon::save_observation_pgm(out_path, neon::preprocess(frame));
      std::cout << "wrote " << out_path << "\n";
    } else if (*baseline) {
      const neon::RunConfig config = build_config(base_opts);
      const neon::BaselineResult result = neon::run_baseline(config, base_episodes);
      std::cout << "random policy over " << base_episodes
                << " episodes: mean reward " << result.empirical_mean << "\n"
                << "exact absorption oracle: " << result.oracle_expected << "\n";
    } else if (*frames) {
      const neon::RunConfig config = build_config(frames_opts);
      std::filesystem::create_directories(config.out_dir);
      neon::LaneEnv env(config.env);
      neon::Rng rng(config.seed);
      char name[64];
      neon::save_ppm(config.out_dir + "/frame_0000.ppm", env.reset());
      for (int t = 1; t < frame_count && !env.episode_over(); ++t) {
        const neon::Frame& f = env.step(static_cast<neon::Action>(rng.uniform_index(3)));
        std::snprintf(name, sizeof(name), "frame_%04d.ppm", t);
        neon::save_ppm(config.out_dir + "/" + name, f);
      }
      neon::save_ppm(config.out_dir + "/game_over.ppm", env.game_over_frame());
      std::cout << "frames written to " << config.out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
