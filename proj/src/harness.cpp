#include "neon/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "neon/checkpoint.hpp"
#include "neon/mdp.hpp"
#include "neon/parallel.hpp"

namespace neon {

namespace {

// Stream tags for Rng::fork; fixed values keep runs reproducible.
enum StreamTag : std::uint64_t {
  kInitStream = 1,
  kExploreStream = 2,
  kReplayStream = 3,
  kNoiseStream = 4,
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

double RunConfig::epsilon_at(std::int64_t step) const {
  return eps_floor + eps_scale * std::exp(-static_cast<double>(step) / eps_decay);
}

RunConfig desk_profile() {
  RunConfig c;
  c.env.step_cap = 60;
  c.env.steps_between_rows = 3;
  c.episodes = 600;
  c.minibatch = 32;
  c.train_every = 2;
  c.eps_decay = 2500.0;
  c.checkpoint_every = 150;
  return c;
}

RunConfig paper_profile() {
  RunConfig c;
  c.env.step_cap = 600;
  c.eps_decay = 20000.0;
  c.checkpoint_every = 500;
  return c;
}

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
  auto as_int = [&](int lo) {
    const int v = std::stoi(value);
    if (v < lo) throw std::invalid_argument("config: " + key + " must be >= " + std::to_string(lo));
    return v;
  };
  auto as_double = [&]() { return std::stod(value); };
  auto as_u64 = [&]() { return static_cast<std::uint64_t>(std::stoull(value)); };

  if (key == "seed") c.seed = as_u64();
  else if (key == "episodes") c.episodes = as_int(0);
  else if (key == "learning_rate") c.learning_rate = as_double();
  else if (key == "rms_rho") c.rms_rho = as_double();
  else if (key == "rms_eps") c.rms_eps = as_double();
  else if (key == "minibatch") c.minibatch = as_int(1);
  else if (key == "buffer") c.buffer_capacity = as_int(1);
  else if (key == "gamma") c.gamma = as_double();
  else if (key == "tau") c.tau = as_double();
  else if (key == "eps_floor") c.eps_floor = as_double();
  else if (key == "eps_scale") c.eps_scale = as_double();
  else if (key == "eps_decay") c.eps_decay = as_double();
  else if (key == "noise") c.noise_p = as_double();
  else if (key == "train_every") c.train_every = as_int(1);
  else if (key == "checkpoint_every") c.checkpoint_every = as_int(1);
  else if (key == "out") c.out_dir = value;
  else if (key == "threads") c.threads = as_int(0);
  else if (key == "env.width") c.env.frame_width = as_int(1);
  else if (key == "env.height") c.env.frame_height = as_int(1);
  else if (key == "env.pattern_seed") c.env.pattern_seed = as_u64();
  else if (key == "env.steps_between_rows") c.env.steps_between_rows = as_int(1);
  else if (key == "env.step_cap") c.env.step_cap = as_int(1);
  else if (key == "env.double_block_prob") c.env.double_block_prob = as_double();
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key = value");
    apply_override(base, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return base;
}

std::vector<double> moving_average(const std::vector<double>& series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out;
  out.reserve(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= static_cast<std::size_t>(window)) sum -= series[i - static_cast<std::size_t>(window)];
    const double n = static_cast<double>(std::min<std::size_t>(window, i + 1));
    out.push_back(sum / n);
  }
  return out;
}

std::pair<double, bool> pixel_reward(const Frame& frame, int steps_done, int steps_between_rows,
                                     const Histogram& game_over_histogram) {
  if (detect_game_over(frame, game_over_histogram)) return {0.0, true};
  if (steps_done >= steps_between_rows) return {1.0, false};  // first row cleared
  return {0.0, false};
}

void write_metrics_csv(const std::string& path, const std::vector<EpisodeMetrics>& metrics) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("metrics: cannot open " + path + " for writing");
  os << "episode,reward,steps,mean_loss,epsilon\n";
  for (const EpisodeMetrics& m : metrics) {
    os << m.episode << ',' << static_cast<long long>(m.total_reward) << ',' << m.steps << ','
       << fmt_double(m.mean_loss) << ',' << fmt_double(m.epsilon_end) << '\n';
  }
}

namespace {

FTensor input_tensor(const std::vector<std::int8_t>& diff, const QNetworkConfig& cfg) {
  FTensor t({1, 1, cfg.input_height, cfg.input_width});
  for (std::size_t i = 0; i < diff.size(); ++i) t.data[i] = static_cast<float>(diff[i]);
  return t;
}

std::vector<std::int8_t> undifferenced(const Observation& obs) {
  std::vector<std::int8_t> v(obs.v.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int8_t>(obs.v[i]);
  return v;
}

// One greedy episode with optional observation noise; shared by eval.
double greedy_episode(QNetwork& net, const RunConfig& config, double noise_p, Rng noise_rng,
                      const Histogram& go_hist) {
  LaneEnv env(config.env);
  const Frame& first = env.reset();
  Observation prev_obs =
      preprocess(noise_p > 0.0 ? add_salt_pepper(first, noise_p, noise_rng) : first);
  std::vector<std::int8_t> input(prev_obs.v.size(), 0);

  double total = 0.0;
  for (int t = 1; t <= config.env.step_cap; ++t) {
    const FTensor q = net.forward(input_tensor(input, config.net), /*training=*/false);
    int best = 0;
    for (int a = 1; a < config.net.actions; ++a)
      if (q.data[static_cast<std::size_t>(a)] > q.data[static_cast<std::size_t>(best)]) best = a;

    const Frame& frame = env.step(static_cast<Action>(best));
    const auto [reward, over] = pixel_reward(frame, t, config.env.steps_between_rows, go_hist);
    total += reward;
    if (over) break;

    const Observation obs =
        preprocess(noise_p > 0.0 ? add_salt_pepper(frame, noise_p, noise_rng) : frame);
    input = diff_observation(obs, prev_obs);
    prev_obs = obs;
  }
  return total;
}

}  // namespace

TrainResult run_training(const RunConfig& config) {
  if (config.episodes < 0) throw std::invalid_argument("train: episodes must be >= 0");
  set_thread_count(config.threads);
  std::filesystem::create_directories(config.out_dir);

  const Rng master(config.seed);
  Rng init_rng = master.fork(kInitStream);
  Rng explore_rng = master.fork(kExploreStream);
  Rng replay_rng = master.fork(kReplayStream);
  Rng noise_rng = master.fork(kNoiseStream);

  QNetwork online(config.net, init_rng);
  QNetwork target = online;
  FRmsprop optimizer(config.learning_rate, config.rms_rho, config.rms_eps);
  ReplayBuffer buffer(static_cast<std::size_t>(config.buffer_capacity));

  LaneEnv env(config.env);
  const Histogram go_hist = gray_histogram(env.game_over_frame());

  TrainResult result;
  result.metrics.reserve(static_cast<std::size_t>(config.episodes));
  std::int64_t global_step = 0;

  for (int episode = 0; episode < config.episodes; ++episode) {
    const auto episode_start = std::chrono::steady_clock::now();
    const Frame& first = env.reset();
    Observation prev_obs = preprocess(
        config.noise_p > 0.0 ? add_salt_pepper(first, config.noise_p, noise_rng) : first);
    std::vector<std::int8_t> input(prev_obs.v.size(), 0);

    EpisodeMetrics m;
    m.episode = episode;
    double loss_sum = 0.0;
    int loss_count = 0;

    for (int t = 1; t <= config.env.step_cap; ++t) {
      const double eps = config.epsilon_at(global_step);
      const FTensor q = online.forward(input_tensor(input, config.net), /*training=*/false);
      const int action = select_action(std::span<const float>(q.data), eps, explore_rng);

      const Frame& frame = env.step(static_cast<Action>(action));
      const auto [reward, over] =
          pixel_reward(frame, t, config.env.steps_between_rows, go_hist);

      const Observation obs = preprocess(
          config.noise_p > 0.0 ? add_salt_pepper(frame, config.noise_p, noise_rng) : frame);
      // The game-over screen bypasses differencing.
      const std::vector<std::int8_t> next_input =
          over ? undifferenced(obs) : diff_observation(obs, prev_obs);

      buffer.add(Transition{pack_diff(input), pack_diff(next_input),
                            static_cast<std::uint8_t>(action), static_cast<float>(reward),
                            over});

      m.total_reward += reward;
      m.steps = t;
      ++global_step;

      if (global_step % config.train_every == 0) {
        if (const auto loss = train_step(online, target, buffer, optimizer, replay_rng,
                                         config.minibatch, config.gamma)) {
          loss_sum += *loss;
          ++loss_count;
          soft_update(online, target, config.tau);
        }
      }

      if (over) break;
      prev_obs = obs;
      input = next_input;
    }

    m.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    m.epsilon_end = config.epsilon_at(global_step);
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - episode_start).count();
    result.metrics.push_back(m);

    if (config.checkpoint_every > 0 && (episode + 1) % config.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", episode + 1);
      save_checkpoint(config.out_dir + "/" + name,
                      snapshot_agent(online, target, optimizer, global_step));
    }
  }

  result.metrics_csv = config.out_dir + "/metrics.csv";
  write_metrics_csv(result.metrics_csv, result.metrics);

  {
    std::ofstream os(config.out_dir + "/timing.csv");
    os << "episode,wall_seconds\n";
    for (const EpisodeMetrics& m : result.metrics)
      os << m.episode << ',' << fmt_double(m.wall_seconds) << '\n';
  }

  result.final_checkpoint = config.out_dir + "/checkpoint_final.ckpt";
  save_checkpoint(result.final_checkpoint,
                  snapshot_agent(online, target, optimizer, global_step));
  return result;
}

EvalResult run_eval(const std::string& checkpoint_path, const RunConfig& config,
                    const std::vector<double>& noise_levels, int episodes) {
  set_thread_count(config.threads);
  const AgentSnapshot snap = restore_agent(load_checkpoint(checkpoint_path), config.net);
  const Histogram go_hist = gray_histogram(LaneEnv::make_game_over_frame(config.env));
  const Rng master(config.seed);

  EvalResult result;
  result.levels.resize(noise_levels.size());

  for (std::size_t li = 0; li < noise_levels.size(); ++li) {
    EvalLevel& level = result.levels[li];
    level.noise_p = noise_levels[li];
    level.rewards.assign(static_cast<std::size_t>(episodes), 0.0);

    // Parallel episodes, merged by index: each episode derives its own rng.
    parallel_for_chunks(episodes, [&](int, std::int64_t begin, std::int64_t end) {
      QNetwork net = snap.online;  // batch-norm caches are per-thread
      for (std::int64_t e = begin; e < end; ++e) {
        Rng episode_rng =
            master.fork(kNoiseStream).fork(li * 1000003ULL + static_cast<std::uint64_t>(e));
        level.rewards[static_cast<std::size_t>(e)] =
            greedy_episode(net, config, level.noise_p, episode_rng, go_hist);
      }
    });

    level.moving_avg = moving_average(level.rewards);
    double sum = 0.0;
    for (double r : level.rewards) sum += r;
    level.mean_reward = episodes > 0 ? sum / episodes : 0.0;
  }

  std::filesystem::create_directories(config.out_dir);
  result.csv_path = config.out_dir + "/eval_noise.csv";
  std::ofstream os(result.csv_path);
  if (!os) throw std::runtime_error("eval: cannot open " + result.csv_path + " for writing");
  os << "noise_level,episode,reward,moving_avg\n";
  for (const EvalLevel& level : result.levels)
    for (std::size_t e = 0; e < level.rewards.size(); ++e)
      os << fmt_double(level.noise_p) << ',' << e << ','
         << static_cast<long long>(level.rewards[e]) << ',' << fmt_double(level.moving_avg[e])
         << '\n';
  return result;
}

BaselineResult run_baseline(const RunConfig& config, int episodes) {
  BaselineResult result;
  result.oracle_expected = uniform_random_policy_return(abstract_mdp(config.env));

  LaneEnv env(config.env);
  const Histogram go_hist = gray_histogram(env.game_over_frame());
  Rng rng = Rng(config.seed).fork(kExploreStream);

  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    double total = 0.0;
    for (int t = 1; t <= config.env.step_cap; ++t) {
      const Frame& frame = env.step(static_cast<Action>(rng.uniform_index(3)));
      const auto [reward, over] =
          pixel_reward(frame, t, config.env.steps_between_rows, go_hist);
      total += reward;
      if (over) break;
    }
    result.rewards.push_back(total);
    sum += total;
  }
  result.empirical_mean = episodes > 0 ? sum / episodes : 0.0;
  return result;
}

}  // namespace neon
