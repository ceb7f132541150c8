#include "neon/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "neon/parallel.hpp"

namespace neon {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
void require_rank(const char* op, const TensorT<T>& t, int rank) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " tensor, got " + shape_str(t.shape));
  }
}

// Gathers the receptive fields of one sample into a (I*K*K) x (OH*OW)
// column-major block.
template <class T>
void im2col(const T* x, std::int64_t channels, std::int64_t h, std::int64_t w, int kernel,
            int stride, std::int64_t oh, std::int64_t ow, T* col, std::int64_t kstar) {
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const std::int64_t p = oy * ow + ox;
      T* dst = col + p * kstar;
      for (std::int64_t c = 0; c < channels; ++c) {
        const T* src = x + (c * h + oy * stride) * w + ox * stride;
        for (int ky = 0; ky < kernel; ++ky) {
          const T* row = src + static_cast<std::int64_t>(ky) * w;
          for (int kx = 0; kx < kernel; ++kx) *dst++ = row[kx];
        }
      }
    }
  }
}

// Scatter-adds a (I*K*K) x (OH*OW) column block back onto one sample.
template <class T>
void col2im_add(const T* col, std::int64_t channels, std::int64_t h, std::int64_t w, int kernel,
                int stride, std::int64_t oh, std::int64_t ow, T* gx, std::int64_t kstar) {
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const std::int64_t p = oy * ow + ox;
      const T* src = col + p * kstar;
      for (std::int64_t c = 0; c < channels; ++c) {
        T* dst = gx + (c * h + oy * stride) * w + ox * stride;
        for (int ky = 0; ky < kernel; ++ky) {
          T* row = dst + static_cast<std::int64_t>(ky) * w;
          for (int kx = 0; kx < kernel; ++kx) row[kx] += *src++;
        }
      }
    }
  }
}

}  // namespace

template <class T>
Conv2dT<T>::Conv2dT(int in_channels, int out_channels, int kernel, int stride)
    : weight({out_channels, in_channels, kernel, kernel}),
      in_channels(in_channels),
      out_channels(out_channels),
      kernel(kernel),
      stride(stride) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
}

template <class T>
void Conv2dT<T>::init(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in_channels) * kernel * kernel);
  for (T& v : weight.data) v = static_cast<T>(rng.uniform(-k, k));
}

template <class T>
TensorT<T> Conv2dT<T>::forward(const TensorT<T>& input) {
  require_rank("conv2d", input, 4);
  check_dim("conv2d", "input channels", input.extent(1), "weight input channels", in_channels);
  if (input.extent(2) < kernel || input.extent(3) < kernel) {
    throw std::invalid_argument("conv2d: spatial extent " + shape_str(input.shape) +
                                " smaller than kernel " + std::to_string(kernel));
  }

  const std::int64_t n = input.extent(0), h = input.extent(2), w = input.extent(3);
  const std::int64_t oh = out_extent(h, kernel, stride), ow = out_extent(w, kernel, stride);
  const std::int64_t p = oh * ow;
  const std::int64_t kstar = static_cast<std::int64_t>(in_channels) * kernel * kernel;

  TensorT<T> out({n, out_channels, oh, ow});
  col_cache_.resize(static_cast<std::size_t>(n * kstar * p));
  cached_input_shape_ = input.shape;

  Eigen::Map<const RowMat<T>> wm(weight.data.data(), out_channels, kstar);
  parallel_for_chunks(n, [&](int, std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      T* col = col_cache_.data() + i * kstar * p;
      im2col(input.data.data() + i * in_channels * h * w, in_channels, h, w, kernel, stride, oh,
             ow, col, kstar);
      Eigen::Map<const ColMat<T>> colm(col, kstar, p);
      Eigen::Map<RowMat<T>> om(out.data.data() + i * out_channels * p, out_channels, p);
      om.noalias() = wm * colm;
    }
  });
  return out;
}

template <class T>
TensorT<T> Conv2dT<T>::backward(const TensorT<T>& grad_output) {
  if (cached_input_shape_.empty())
    throw std::logic_error("conv2d: backward before forward");
  const std::int64_t n = cached_input_shape_[0], h = cached_input_shape_[2],
                     w = cached_input_shape_[3];
  const std::int64_t oh = out_extent(h, kernel, stride), ow = out_extent(w, kernel, stride);
  const std::int64_t p = oh * ow;
  const std::int64_t kstar = static_cast<std::int64_t>(in_channels) * kernel * kernel;
  check_dim("conv2d backward", "grad batch", grad_output.extent(0), "input batch", n);

  weight.ensure_grad();
  TensorT<T> grad_input(cached_input_shape_);

  Eigen::Map<const RowMat<T>> wm(weight.data.data(), out_channels, kstar);
  std::vector<RowMat<T>> dw_partial(static_cast<std::size_t>(chunk_count(n)));

  parallel_for_chunks(n, [&](int chunk, std::int64_t begin, std::int64_t end) {
    RowMat<T>& dw = dw_partial[static_cast<std::size_t>(chunk)];
    dw = RowMat<T>::Zero(out_channels, kstar);
    ColMat<T> dcol(kstar, p);
    for (std::int64_t i = begin; i < end; ++i) {
      Eigen::Map<const ColMat<T>> colm(col_cache_.data() + i * kstar * p, kstar, p);
      Eigen::Map<const RowMat<T>> gym(grad_output.data.data() + i * out_channels * p,
                                      out_channels, p);
      dw.noalias() += gym * colm.transpose();
      dcol.noalias() = wm.transpose() * gym;
      col2im_add(dcol.data(), in_channels, h, w, kernel, stride, oh, ow,
                 grad_input.data.data() + i * in_channels * h * w, kstar);
    }
  });

  // Reduce in chunk order; the chunking is fixed by n, so the sum order (and
  // therefore the rounding) never depends on the worker count.
  Eigen::Map<RowMat<T>> wg(weight.grad.data(), out_channels, kstar);
  for (const RowMat<T>& dw : dw_partial)
    if (dw.size() > 0) wg += dw;

  return grad_input;
}

template <class T>
BatchNorm2dT<T>::BatchNorm2dT(int channels, double momentum, double eps)
    : gamma({channels}, T(1)),
      beta({channels}, T(0)),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)),
      channels(channels),
      momentum(momentum),
      eps(eps) {}

template <class T>
TensorT<T> BatchNorm2dT<T>::forward(const TensorT<T>& input, bool training) {
  require_rank("batchnorm2d", input, 4);
  check_dim("batchnorm2d", "input channels", input.extent(1), "layer channels", channels);

  const std::int64_t n = input.extent(0), h = input.extent(2), w = input.extent(3);
  const std::int64_t hw = h * w;
  const std::int64_t m = n * hw;  // samples per channel

  batch_mean_.assign(static_cast<std::size_t>(channels), 0.0);
  batch_inv_std_.assign(static_cast<std::size_t>(channels), 0.0);

  if (training) {
    for (int c = 0; c < channels; ++c) {
      double sum = 0.0, sq = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* x = input.data.data() + (i * channels + c) * hw;
        for (std::int64_t j = 0; j < hw; ++j) {
          const double v = static_cast<double>(x[j]);
          sum += v;
          sq += v * v;
        }
      }
      const double mean = sum / static_cast<double>(m);
      double var = sq / static_cast<double>(m) - mean * mean;
      if (var < 0.0) var = 0.0;  // cancellation guard
      batch_mean_[static_cast<std::size_t>(c)] = mean;
      batch_inv_std_[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + eps);

      const double unbiased =
          m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      auto& rm = running_mean.data[static_cast<std::size_t>(c)];
      auto& rv = running_var.data[static_cast<std::size_t>(c)];
      rm = static_cast<T>((1.0 - momentum) * static_cast<double>(rm) + momentum * mean);
      rv = static_cast<T>((1.0 - momentum) * static_cast<double>(rv) + momentum * unbiased);
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      batch_mean_[static_cast<std::size_t>(c)] =
          static_cast<double>(running_mean.data[static_cast<std::size_t>(c)]);
      batch_inv_std_[static_cast<std::size_t>(c)] =
          1.0 / std::sqrt(static_cast<double>(running_var.data[static_cast<std::size_t>(c)]) +
                          eps);
    }
  }

  TensorT<T> out(input.shape);
  parallel_for_chunks(n, [&](int, std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      for (int c = 0; c < channels; ++c) {
        const T mean = static_cast<T>(batch_mean_[static_cast<std::size_t>(c)]);
        const T inv_std = static_cast<T>(batch_inv_std_[static_cast<std::size_t>(c)]);
        const T g = gamma.data[static_cast<std::size_t>(c)];
        const T b = beta.data[static_cast<std::size_t>(c)];
        const T* x = input.data.data() + (i * channels + c) * hw;
        T* y = out.data.data() + (i * channels + c) * hw;
        for (std::int64_t j = 0; j < hw; ++j) y[j] = g * (x[j] - mean) * inv_std + b;
      }
    }
  });

  cached_input_ = input;
  cached_training_ = training;
  return out;
}

template <class T>
TensorT<T> BatchNorm2dT<T>::backward(const TensorT<T>& grad_output) {
  const TensorT<T>& input = cached_input_;
  const std::int64_t n = input.extent(0), hw = input.extent(2) * input.extent(3);
  const std::int64_t m = n * hw;

  gamma.ensure_grad();
  beta.ensure_grad();
  TensorT<T> grad_input(input.shape);

  for (int c = 0; c < channels; ++c) {
    const double mean = batch_mean_[static_cast<std::size_t>(c)];
    const double inv_std = batch_inv_std_[static_cast<std::size_t>(c)];
    const double g = static_cast<double>(gamma.data[static_cast<std::size_t>(c)]);

    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const T* x = input.data.data() + (i * channels + c) * hw;
      const T* gy = grad_output.data.data() + (i * channels + c) * hw;
      for (std::int64_t j = 0; j < hw; ++j) {
        sum_gy += static_cast<double>(gy[j]);
        sum_gy_xhat += static_cast<double>(gy[j]) * (static_cast<double>(x[j]) - mean) * inv_std;
      }
    }
    gamma.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_gy_xhat);
    beta.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_gy);

    if (cached_training_) {
      const double inv_m = 1.0 / static_cast<double>(m);
      const double k1 = inv_m * sum_gy;
      const double k2 = inv_m * sum_gy_xhat;
      for (std::int64_t i = 0; i < n; ++i) {
        const T* x = input.data.data() + (i * channels + c) * hw;
        const T* gy = grad_output.data.data() + (i * channels + c) * hw;
        T* gx = grad_input.data.data() + (i * channels + c) * hw;
        for (std::int64_t j = 0; j < hw; ++j) {
          const double xhat = (static_cast<double>(x[j]) - mean) * inv_std;
          gx[j] = static_cast<T>(g * inv_std * (static_cast<double>(gy[j]) - k1 - xhat * k2));
        }
      }
    } else {
      for (std::int64_t i = 0; i < n; ++i) {
        const T* gy = grad_output.data.data() + (i * channels + c) * hw;
        T* gx = grad_input.data.data() + (i * channels + c) * hw;
        for (std::int64_t j = 0; j < hw; ++j)
          gx[j] = static_cast<T>(g * inv_std * static_cast<double>(gy[j]));
      }
    }
  }
  return grad_input;
}

template <class T>
TensorT<T> ReluT<T>::forward(const TensorT<T>& input) {
  TensorT<T> out(input.shape);
  mask_.assign(input.data.size(), 0);
  cached_shape_ = input.shape;
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    if (input.data[i] > T(0)) {
      out.data[i] = input.data[i];
      mask_[i] = 1;
    }
  }
  return out;
}

template <class T>
TensorT<T> ReluT<T>::backward(const TensorT<T>& grad_output) {
  TensorT<T> grad_input(cached_shape_);
  for (std::size_t i = 0; i < grad_output.data.size(); ++i)
    grad_input.data[i] = mask_[i] ? grad_output.data[i] : T(0);
  return grad_input;
}

template <class T>
LinearT<T>::LinearT(int in_features, int out_features)
    : weight({out_features, in_features}),
      bias({out_features}),
      in_features(in_features),
      out_features(out_features) {}

template <class T>
void LinearT<T>::init(Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in_features));
  for (T& v : weight.data) v = static_cast<T>(rng.uniform(-k, k));
  for (T& v : bias.data) v = static_cast<T>(rng.uniform(-k, k));
}

template <class T>
TensorT<T> LinearT<T>::forward(const TensorT<T>& input) {
  require_rank("linear", input, 2);
  check_dim("linear", "input features", input.extent(1), "weight features", in_features);

  const std::int64_t n = input.extent(0);
  TensorT<T> out({n, out_features});
  Eigen::Map<const RowMat<T>> xm(input.data.data(), n, in_features);
  Eigen::Map<const RowMat<T>> wm(weight.data.data(), out_features, in_features);
  Eigen::Map<RowMat<T>> ym(out.data.data(), n, out_features);
  ym.noalias() = xm * wm.transpose();
  for (std::int64_t i = 0; i < n; ++i)
    for (int a = 0; a < out_features; ++a)
      out.data[static_cast<std::size_t>(i * out_features + a)] +=
          bias.data[static_cast<std::size_t>(a)];

  cached_input_ = input;
  return out;
}

template <class T>
TensorT<T> LinearT<T>::backward(const TensorT<T>& grad_output) {
  const TensorT<T>& input = cached_input_;
  const std::int64_t n = input.extent(0);
  check_dim("linear backward", "grad batch", grad_output.extent(0), "input batch", n);

  weight.ensure_grad();
  bias.ensure_grad();
  TensorT<T> grad_input(input.shape);

  Eigen::Map<const RowMat<T>> xm(input.data.data(), n, in_features);
  Eigen::Map<const RowMat<T>> gym(grad_output.data.data(), n, out_features);
  Eigen::Map<RowMat<T>> wg(weight.grad.data(), out_features, in_features);
  Eigen::Map<RowMat<T>> gxm(grad_input.data.data(), n, in_features);

  wg.noalias() += gym.transpose() * xm;
  for (std::int64_t i = 0; i < n; ++i)
    for (int a = 0; a < out_features; ++a)
      bias.grad[static_cast<std::size_t>(a)] +=
          grad_output.data[static_cast<std::size_t>(i * out_features + a)];
  gxm.noalias() =
      gym * Eigen::Map<const RowMat<T>>(weight.data.data(), out_features, in_features);

  return grad_input;
}

template <class T>
double squared_td_loss(const TensorT<T>& predicted, const TensorT<T>& target,
                       TensorT<T>* grad_predicted) {
  check_dim("squared_td_loss", "predicted length", predicted.size(), "target length",
            target.size());
  const std::int64_t n = predicted.size();
  if (n == 0) throw std::invalid_argument("squared_td_loss: empty batch");

  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(target.data[static_cast<std::size_t>(i)]) -
                     static_cast<double>(predicted.data[static_cast<std::size_t>(i)]);
    loss += d * d;
  }
  loss /= static_cast<double>(n);

  if (grad_predicted) {
    *grad_predicted = TensorT<T>(predicted.shape);
    for (std::int64_t i = 0; i < n; ++i) {
      grad_predicted->data[static_cast<std::size_t>(i)] = static_cast<T>(
          2.0 *
          (static_cast<double>(predicted.data[static_cast<std::size_t>(i)]) -
           static_cast<double>(target.data[static_cast<std::size_t>(i)])) /
          static_cast<double>(n));
    }
  }
  return loss;
}

template class Conv2dT<float>;
template class Conv2dT<double>;
template class BatchNorm2dT<float>;
template class BatchNorm2dT<double>;
template class ReluT<float>;
template class ReluT<double>;
template class LinearT<float>;
template class LinearT<double>;
template double squared_td_loss<float>(const TensorT<float>&, const TensorT<float>&,
                                       TensorT<float>*);
template double squared_td_loss<double>(const TensorT<double>&, const TensorT<double>&,
                                        TensorT<double>*);

}  // namespace neon
