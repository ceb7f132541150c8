#include "neon/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace neon {

namespace {

// The forward/backward passes allocate multi-megabyte activation buffers
// every call. glibc serves those from fresh mmap regions and returns them on
// free, which re-faults every page each step; raising the thresholds keeps
// the blocks on the heap and roughly halves the step time.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

QNetwork::QNetwork(const QNetworkConfig& config, Rng& init_rng)
    : config_(config),
      conv1_(1, config.channels[0], config.kernel, config.stride),
      conv2_(config.channels[0], config.channels[1], config.kernel, config.stride),
      conv3_(config.channels[1], config.channels[2], config.kernel, config.stride),
      bn1_(config.channels[0]),
      bn2_(config.channels[1]),
      bn3_(config.channels[2]),
      fc_(1, 1) {
  std::int64_t h = config.input_height, w = config.input_width;
  for (int i = 0; i < 3; ++i) {
    h = Conv2d::out_extent(h, config.kernel, config.stride);
    w = Conv2d::out_extent(w, config.kernel, config.stride);
    if (h < 1 || w < 1)
      throw std::invalid_argument("q-network: input too small for three conv layers");
  }
  features_ = static_cast<std::int64_t>(config.channels[2]) * h * w;
  fc_ = LinearT<float>(static_cast<int>(features_), config.actions);

  conv1_.init(init_rng);
  conv2_.init(init_rng);
  conv3_.init(init_rng);
  fc_.init(init_rng);
}

FTensor QNetwork::forward(const FTensor& input, bool training) {
  if (input.rank() != 4 || input.extent(1) != 1 || input.extent(2) != config_.input_height ||
      input.extent(3) != config_.input_width) {
    throw std::invalid_argument("q-network: expected N x 1 x " +
                                std::to_string(config_.input_height) + " x " +
                                std::to_string(config_.input_width) + " input, got " +
                                shape_str(input.shape));
  }
  FTensor x = relu1_.forward(bn1_.forward(conv1_.forward(input), training));
  x = relu2_.forward(bn2_.forward(conv2_.forward(x), training));
  x = relu3_.forward(bn3_.forward(conv3_.forward(x), training));
  pre_flatten_shape_ = x.shape;
  x.shape = {x.extent(0), features_};  // flatten view; data is already row-major
  return fc_.forward(x);
}

void QNetwork::backward(const FTensor& grad_output) {
  FTensor g = fc_.backward(grad_output);
  g.shape = pre_flatten_shape_;
  g = conv3_.backward(bn3_.backward(relu3_.backward(g)));
  g = conv2_.backward(bn2_.backward(relu2_.backward(g)));
  conv1_.backward(bn1_.backward(relu1_.backward(g)));
}

void QNetwork::zero_grad() {
  for (FTensor* t : trainable()) {
    t->ensure_grad();
    t->zero_grad();
  }
}

std::vector<FTensor*> QNetwork::trainable() {
  return {&conv1_.weight, &bn1_.gamma, &bn1_.beta,  &conv2_.weight, &bn2_.gamma, &bn2_.beta,
          &conv3_.weight, &bn3_.gamma, &bn3_.beta,  &fc_.weight,    &fc_.bias};
}

std::vector<std::pair<std::string, FTensor*>> QNetwork::named_state() {
  return {{"conv1.weight", &conv1_.weight},
          {"bn1.gamma", &bn1_.gamma},
          {"bn1.beta", &bn1_.beta},
          {"bn1.running_mean", &bn1_.running_mean},
          {"bn1.running_var", &bn1_.running_var},
          {"conv2.weight", &conv2_.weight},
          {"bn2.gamma", &bn2_.gamma},
          {"bn2.beta", &bn2_.beta},
          {"bn2.running_mean", &bn2_.running_mean},
          {"bn2.running_var", &bn2_.running_var},
          {"conv3.weight", &conv3_.weight},
          {"bn3.gamma", &bn3_.gamma},
          {"bn3.beta", &bn3_.beta},
          {"bn3.running_mean", &bn3_.running_mean},
          {"bn3.running_var", &bn3_.running_var},
          {"fc.weight", &fc_.weight},
          {"fc.bias", &fc_.bias}};
}

std::vector<std::pair<std::string, const FTensor*>> QNetwork::named_state() const {
  auto mutable_pairs = const_cast<QNetwork*>(this)->named_state();
  std::vector<std::pair<std::string, const FTensor*>> out;
  out.reserve(mutable_pairs.size());
  for (auto& [name, tensor] : mutable_pairs) out.emplace_back(name, tensor);
  return out;
}

void soft_update(const QNetwork& online, QNetwork& target, double tau) {
  const auto src = online.named_state();
  auto dst = target.named_state();
  check_dim("soft_update", "online tensors", static_cast<std::int64_t>(src.size()),
            "target tensors", static_cast<std::int64_t>(dst.size()));
  for (std::size_t i = 0; i < src.size(); ++i) {
    const FTensor& s = *src[i].second;
    FTensor& d = *dst[i].second;
    check_dim("soft_update", "online size", s.size(), "target size", d.size());
    for (std::size_t j = 0; j < d.data.size(); ++j)
      d.data[j] = static_cast<float>(tau * static_cast<double>(s.data[j]) +
                                     (1.0 - tau) * static_cast<double>(d.data[j]));
  }
}

PackedDiff pack_diff(std::span<const std::int8_t> diff) {
  PackedDiff p;
  p.count = static_cast<std::uint32_t>(diff.size());
  const std::size_t words = (diff.size() + 63) / 64;
  p.pos.assign(words, 0);
  p.neg.assign(words, 0);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    if (diff[i] > 0)
      p.pos[i >> 6] |= 1ULL << (i & 63);
    else if (diff[i] < 0)
      p.neg[i >> 6] |= 1ULL << (i & 63);
  }
  return p;
}

void unpack_diff(const PackedDiff& packed, float* out) {
  for (std::size_t i = 0; i < packed.count; ++i) {
    const std::uint64_t bit = 1ULL << (i & 63);
    out[i] = (packed.pos[i >> 6] & bit) ? 1.0f : ((packed.neg[i >> 6] & bit) ? -1.0f : 0.0f);
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::add(Transition t) {
  if (size_ < capacity_) {
    ring_.push_back(std::move(t));
    ++size_;
  } else {
    ring_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<double> compute_targets(std::span<const Transition* const> batch, QNetwork& target,
                                    double gamma) {
  const std::size_t n = batch.size();
  std::vector<double> y(n, 0.0);

  std::vector<std::size_t> live;
  live.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<double>(batch[i]->reward);
    if (!batch[i]->terminal) live.push_back(i);
  }
  if (live.empty()) return y;

  const QNetworkConfig& cfg = target.config();
  const std::int64_t hw = static_cast<std::int64_t>(cfg.input_height) * cfg.input_width;
  FTensor next({static_cast<std::int64_t>(live.size()), 1, cfg.input_height, cfg.input_width});
  for (std::size_t j = 0; j < live.size(); ++j)
    unpack_diff(batch[live[j]]->next_state, next.data.data() + static_cast<std::int64_t>(j) * hw);

  const FTensor q = target.forward(next, /*training=*/false);
  const int actions = cfg.actions;
  for (std::size_t j = 0; j < live.size(); ++j) {
    const float* row = q.data.data() + static_cast<std::int64_t>(j) * actions;
    float best = row[0];
    for (int a = 1; a < actions; ++a) best = std::max(best, row[a]);
    y[live[j]] += gamma * static_cast<double>(best);
  }
  return y;
}

std::optional<double> train_step(QNetwork& online, QNetwork& target, const ReplayBuffer& buffer,
                                 FRmsprop& optimizer, Rng& rng, int minibatch, double gamma) {
  if (buffer.size() < static_cast<std::size_t>(minibatch)) return std::nullopt;

  std::vector<const Transition*> batch(static_cast<std::size_t>(minibatch));
  for (auto& slot : batch) slot = &buffer.at(rng.uniform_index(buffer.size()));  // U(D)

  const QNetworkConfig& cfg = online.config();
  const std::int64_t hw = static_cast<std::int64_t>(cfg.input_height) * cfg.input_width;
  FTensor states({minibatch, 1, cfg.input_height, cfg.input_width});
  for (int i = 0; i < minibatch; ++i)
    unpack_diff(batch[static_cast<std::size_t>(i)]->state, states.data.data() + i * hw);

  const std::vector<double> targets = compute_targets(batch, target, gamma);

  FTensor q_all = online.forward(states, /*training=*/true);
  FTensor q_taken({minibatch});
  for (int i = 0; i < minibatch; ++i)
    q_taken.data[static_cast<std::size_t>(i)] =
        q_all.data[static_cast<std::size_t>(i * cfg.actions +
                                            batch[static_cast<std::size_t>(i)]->action)];

  FTensor y({minibatch});
  for (int i = 0; i < minibatch; ++i)
    y.data[static_cast<std::size_t>(i)] = static_cast<float>(targets[static_cast<std::size_t>(i)]);
  FTensor grad_taken;
  const double loss = squared_td_loss(q_taken, y, &grad_taken);

  // Scatter the gradient onto the taken action heads; the others get 0.
  FTensor grad_all(q_all.shape);
  for (int i = 0; i < minibatch; ++i)
    grad_all.data[static_cast<std::size_t>(i * cfg.actions +
                                           batch[static_cast<std::size_t>(i)]->action)] =
        grad_taken.data[static_cast<std::size_t>(i)];

  online.zero_grad();
  online.backward(grad_all);
  optimizer.step(online.trainable());
  return loss;
}

namespace {

Tensor widened(const FTensor& t) {
  Tensor out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

}  // namespace

NamedTensors snapshot_agent(const QNetwork& online, const QNetwork& target,
                            const FRmsprop& optimizer, std::int64_t global_step) {
  NamedTensors out;
  for (const auto& [name, tensor] : online.named_state())
    out.emplace_back("online/" + name, widened(*tensor));
  for (const auto& [name, tensor] : target.named_state())
    out.emplace_back("target/" + name, widened(*tensor));
  const auto& sq = optimizer.state();
  for (std::size_t i = 0; i < sq.size(); ++i) {
    Tensor t({static_cast<std::int64_t>(sq[i].size())});
    t.data.assign(sq[i].begin(), sq[i].end());
    out.emplace_back("rmsprop/sq_avg." + std::to_string(i), std::move(t));
  }
  Tensor step({1});
  step.data[0] = static_cast<double>(global_step);
  out.emplace_back("meta/global_step", std::move(step));
  return out;
}

AgentSnapshot restore_agent(const NamedTensors& tensors, const QNetworkConfig& config) {
  Rng dummy(0);
  AgentSnapshot snap{QNetwork(config, dummy), QNetwork(config, dummy), {}, 0};

  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw std::runtime_error("checkpoint: missing tensor " + name);
  };

  for (auto& [name, tensor] : snap.online.named_state()) {
    const Tensor& loaded = find("online/" + name);
    check_dim("restore_agent", "loaded size", loaded.size(), "expected size", tensor->size());
    tensor->data.assign(loaded.data.begin(), loaded.data.end());
  }
  for (auto& [name, tensor] : snap.target.named_state()) {
    const Tensor& loaded = find("target/" + name);
    check_dim("restore_agent", "loaded size", loaded.size(), "expected size", tensor->size());
    tensor->data.assign(loaded.data.begin(), loaded.data.end());
  }
  for (std::size_t i = 0;; ++i) {
    bool found = false;
    for (const auto& [n, t] : tensors) {
      if (n == "rmsprop/sq_avg." + std::to_string(i)) {
        snap.optimizer_sq_avg.emplace_back(t.data.begin(), t.data.end());
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  snap.global_step = static_cast<std::int64_t>(find("meta/global_step").data[0]);
  return snap;
}

}  // namespace neon
