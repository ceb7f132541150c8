#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace neon {

std::int64_t shape_product(const std::vector<std::int64_t>& extents);
std::string shape_str(const std::vector<std::int64_t>& extents);

// Throws std::invalid_argument naming both dimensions when they differ,
// e.g. "conv2d: input channels (3) != weight input channels (4)".
void check_dim(const char* op, const char* lhs_name, std::int64_t lhs,
               const char* rhs_name, std::int64_t rhs);

// Dense row-major tensor with an optional same-shape gradient slot; layers
// fill `grad` during their backward pass. The double instantiation is the
// reference used by every gradient check; the float instantiation carries
// training, where it halves memory traffic and doubles SIMD width.
template <class T>
struct TensorT {
  std::vector<std::int64_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass (or ensure_grad)

  TensorT() = default;
  explicit TensorT(std::vector<std::int64_t> extents, T fill = T(0))
      : shape(std::move(extents)),
        data(static_cast<std::size_t>(shape_product(shape)), fill) {}

  static TensorT from(std::vector<std::int64_t> extents, std::vector<T> values) {
    TensorT t;
    t.shape = std::move(extents);
    if (shape_product(t.shape) != static_cast<std::int64_t>(values.size())) {
      throw std::invalid_argument("Tensor::from: " + shape_str(t.shape) + " needs " +
                                  std::to_string(shape_product(t.shape)) + " values, got " +
                                  std::to_string(values.size()));
    }
    t.data = std::move(values);
    return t;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t extent(int axis) const { return shape[static_cast<std::size_t>(axis)]; }
  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

  bool all_finite() const {
    auto finite = [](const std::vector<T>& v) {
      for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
      return true;
    };
    return finite(data) && finite(grad);
  }
};

using Tensor = TensorT<double>;
using FTensor = TensorT<float>;

}  // namespace neon
