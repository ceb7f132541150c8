#pragma once

#include <vector>

#include "neon/tensor.hpp"

namespace neon {

// RMSprop: v <- rho*v + (1-rho)*g^2 ; theta <- theta - lr*g/(sqrt(v) + eps).
template <class T>
class RmspropT {
 public:
  explicit RmspropT(double learning_rate = 1e-3, double rho = 0.99, double eps = 1e-8)
      : learning_rate(learning_rate), rho(rho), eps(eps) {}

  // Applies one update using each parameter's grad slot. Parameters must be
  // passed in a stable order; the squared-gradient averages are keyed by
  // position.
  void step(const std::vector<TensorT<T>*>& params);

  double learning_rate, rho, eps;

  // Per-parameter squared-gradient running averages (nonnegative elementwise).
  std::vector<std::vector<T>>& state() { return sq_avg_; }
  const std::vector<std::vector<T>>& state() const { return sq_avg_; }

 private:
  std::vector<std::vector<T>> sq_avg_;
};

using Rmsprop = RmspropT<double>;
using FRmsprop = RmspropT<float>;

}  // namespace neon
