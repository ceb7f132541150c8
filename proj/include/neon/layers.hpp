#pragma once

#include "neon/rng.hpp"
#include "neon/tensor.hpp"

namespace neon {

// 2-D cross-correlation over NCHW input, OIKK weight, valid padding, no bias.
// Output spatial extent is floor((in - K) / stride) + 1 per axis.
template <class T>
class Conv2dT {
 public:
  Conv2dT(int in_channels, int out_channels, int kernel, int stride);

  void init(Rng& rng);  // U(-k, k) with k = 1/sqrt(fan_in)

  TensorT<T> forward(const TensorT<T>& input);
  // Accumulates into weight.grad, returns grad w.r.t. the last forward's
  // input. Reuses the receptive-field gather cached by that forward.
  TensorT<T> backward(const TensorT<T>& grad_output);

  TensorT<T> weight;  // out_channels x in_channels x kernel x kernel
  int in_channels, out_channels, kernel, stride;

  static std::int64_t out_extent(std::int64_t in, int kernel, int stride) {
    return (in - kernel) / stride + 1;
  }

 private:
  std::vector<T> col_cache_;  // (I*K*K) x (OH*OW) per sample, column-major
  std::vector<std::int64_t> cached_input_shape_;
};

// Per-channel batch normalization over NCHW input. Train mode normalizes by
// batch statistics and folds them into the running estimates with the given
// momentum; eval mode normalizes by the running estimates. Statistics are
// accumulated in double regardless of T.
template <class T>
class BatchNorm2dT {
 public:
  explicit BatchNorm2dT(int channels, double momentum = 0.1, double eps = 1e-8);

  TensorT<T> forward(const TensorT<T>& input, bool training);
  TensorT<T> backward(const TensorT<T>& grad_output);  // accumulates gamma/beta grads

  TensorT<T> gamma, beta;               // trainable, shape [C]
  TensorT<T> running_mean, running_var; // tracked, shape [C]
  int channels;
  double momentum, eps;

 private:
  TensorT<T> cached_input_;
  std::vector<double> batch_mean_, batch_inv_std_;
  bool cached_training_ = false;
};

// Elementwise max(0, x); the subgradient at 0 is 0.
template <class T>
class ReluT {
 public:
  TensorT<T> forward(const TensorT<T>& input);
  TensorT<T> backward(const TensorT<T>& grad_output);

 private:
  std::vector<char> mask_;
  std::vector<std::int64_t> cached_shape_;
};

// Affine map: input [N x F] * weight [A x F]^T + bias [A] -> [N x A].
template <class T>
class LinearT {
 public:
  LinearT(int in_features, int out_features);

  void init(Rng& rng);

  TensorT<T> forward(const TensorT<T>& input);
  TensorT<T> backward(const TensorT<T>& grad_output);

  TensorT<T> weight;  // A x F
  TensorT<T> bias;    // A
  int in_features, out_features;

 private:
  TensorT<T> cached_input_;
};

// Mean over the minibatch of (target - predicted)^2. Targets are constants:
// the gradient flows only into `predicted` (written to grad_predicted when
// non-null, as d(loss)/d(predicted)).
template <class T>
double squared_td_loss(const TensorT<T>& predicted, const TensorT<T>& target,
                       TensorT<T>* grad_predicted = nullptr);

using Conv2d = Conv2dT<double>;
using BatchNorm2d = BatchNorm2dT<double>;
using Relu = ReluT<double>;
using Linear = LinearT<double>;

}  // namespace neon
