#include "neon/rmsprop.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace neon {

template <class T>
void RmspropT<T>::step(const std::vector<TensorT<T>*>& params) {
  if (sq_avg_.empty()) {
    sq_avg_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p)
      sq_avg_[p].assign(params[p]->data.size(), T(0));
  }
  check_dim("rmsprop", "parameter count", static_cast<std::int64_t>(params.size()),
            "state count", static_cast<std::int64_t>(sq_avg_.size()));

  const T lr = static_cast<T>(learning_rate);
  const T r = static_cast<T>(rho);
  const T one_minus_r = static_cast<T>(1.0 - rho);
  const T e = static_cast<T>(eps);

  for (std::size_t p = 0; p < params.size(); ++p) {
    TensorT<T>& t = *params[p];
    if (t.grad.size() != t.data.size())
      throw std::invalid_argument("rmsprop: parameter " + std::to_string(p) + " has no grad");
    std::vector<T>& v = sq_avg_[p];
    check_dim("rmsprop", "parameter size", t.size(), "state size",
              static_cast<std::int64_t>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T g = t.grad[i];
      v[i] = r * v[i] + one_minus_r * g * g;
      t.data[i] -= lr * g / (std::sqrt(v[i]) + e);
    }
  }
}

template class RmspropT<float>;
template class RmspropT<double>;

}  // namespace neon
