#pragma once

#include <span>
#include <vector>

#include "precise/tensor.hpp"

namespace precise {

struct AdamOptions {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::size_t step = 0;
};

// Adam with L2-coupled decay: g' = g + wd * theta, bias-corrected moments,
// theta -= lr * m_hat / (sqrt(v_hat) + eps). Parameters without a gradient
// buffer are treated as having a zero gradient.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, const AdamOptions& options);

}  // namespace precise
