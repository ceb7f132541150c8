#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neon/checkpoint.hpp"
#include "neon/image.hpp"
#include "neon/layers.hpp"
#include "neon/rmsprop.hpp"
#include "neon/rng.hpp"
#include "neon/tensor.hpp"

namespace neon {

// Q-network over single-channel observation differences: three stride-2
// convolutions with batch norm and ReLU, then a linear head with one output
// per action. Runs in float32; the float64 layer instantiations carry the
// gradient-check suite.
struct QNetworkConfig {
  int input_height = kObservationHeight;
  int input_width = kObservationWidth;
  std::array<int, 3> channels = {16, 32, 32};
  int kernel = 5;
  int stride = 2;
  int actions = 3;
};

class QNetwork {
 public:
  QNetwork(const QNetworkConfig& config, Rng& init_rng);

  // input: N x 1 x H x W; returns N x actions. Train mode uses batch
  // statistics and updates the running estimates; eval mode is deterministic.
  FTensor forward(const FTensor& input, bool training);
  // Backward for the latest forward; accumulates all parameter grads.
  void backward(const FTensor& grad_output);
  void zero_grad();

  std::vector<FTensor*> trainable();
  // Trainable parameters plus batch-norm running statistics, stable order.
  std::vector<std::pair<std::string, FTensor*>> named_state();
  std::vector<std::pair<std::string, const FTensor*>> named_state() const;

  const QNetworkConfig& config() const { return config_; }
  std::int64_t feature_count() const { return features_; }

 private:
  QNetworkConfig config_;
  Conv2dT<float> conv1_, conv2_, conv3_;
  BatchNorm2dT<float> bn1_, bn2_, bn3_;
  ReluT<float> relu1_, relu2_, relu3_;
  LinearT<float> fc_;
  std::int64_t features_ = 0;
  std::vector<std::int64_t> pre_flatten_shape_;
};

// theta_target <- tau*theta + (1-tau)*theta_target, elementwise over all
// state tensors including batch-norm running statistics.
void soft_update(const QNetwork& online, QNetwork& target, double tau);

// Epsilon-greedy: uniform action with probability epsilon, else argmax with
// lowest-index tie-break.
template <class T>
int select_action(std::span<const T> q_values, double epsilon, Rng& rng) {
  const double u = rng.uniform();
  if (u < epsilon) return static_cast<int>(rng.uniform_index(q_values.size()));
  int best = 0;
  for (std::size_t a = 1; a < q_values.size(); ++a)
    if (q_values[a] > q_values[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  return best;
}

// Observation difference in {-1,0,1}, stored as two bit planes.
struct PackedDiff {
  std::vector<std::uint64_t> pos, neg;
  std::uint32_t count = 0;
};
PackedDiff pack_diff(std::span<const std::int8_t> diff);
void unpack_diff(const PackedDiff& packed, float* out);

struct Transition {
  PackedDiff state;       // observation difference fed to the network
  PackedDiff next_state;  // successor input (undifferenced for game over)
  std::uint8_t action = 0;
  float reward = 0.0f;
  bool terminal = false;  // collision; the target is then just the reward
};

// Fixed-capacity ring; the oldest transition is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return ring_[i]; }

 private:
  std::vector<Transition> ring_;
  std::size_t capacity_, cursor_ = 0, size_ = 0;
};

// y_i = r_i + gamma * max_a' Q(s'_i, a'; target) for non-terminal
// transitions, y_i = r_i otherwise. The target network runs in eval mode and
// receives no gradient.
std::vector<double> compute_targets(std::span<const Transition* const> batch,
                                    QNetwork& target, double gamma);

// One DQN update: samples `minibatch` transitions uniformly with
// replacement, regresses the taken action's Q-value onto the targets, and
// applies an RMSprop step. Returns the loss, or nullopt while the buffer
// holds fewer than `minibatch` transitions.
std::optional<double> train_step(QNetwork& online, QNetwork& target, const ReplayBuffer& buffer,
                                 FRmsprop& optimizer, Rng& rng, int minibatch, double gamma);

// Checkpoint helpers: network + optimizer state + schedule step. Payloads
// are widened to the float64 checkpoint format (exact) and narrowed back on
// load (also exact, since every stored value originated as a float).
NamedTensors snapshot_agent(const QNetwork& online, const QNetwork& target,
                            const FRmsprop& optimizer, std::int64_t global_step);
struct AgentSnapshot {
  QNetwork online;
  QNetwork target;
  std::vector<std::vector<float>> optimizer_sq_avg;
  std::int64_t global_step = 0;
};
AgentSnapshot restore_agent(const NamedTensors& tensors, const QNetworkConfig& config);

}  // namespace neon
