#include "precise/adam.hpp"

#include <cmath>

#include "precise/errors.hpp"

namespace precise {

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, const AdamOptions& options) {
  if (state.first_moment.empty()) {
    for (const Tensor<T>& p : params) {
      state.first_moment.emplace_back(p.size(), T(0));
      state.second_moment.emplace_back(p.size(), T(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw_shape_error("adam_step", "optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                       " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != p.size()) throw_shape_error("adam_step", "moment shape differs from parameter shape");
    auto values = p.mutable_values();
    const auto grad = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double theta = values[i];
      const double g = (grad.empty() ? 0.0 : static_cast<double>(grad[i])) + options.weight_decay * theta;
      const double mi = options.beta1 * m[i] + (1.0 - options.beta1) * g;
      const double vi = options.beta2 * v[i] + (1.0 - options.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      values[i] = static_cast<T>(theta - options.lr * m_hat / (std::sqrt(v_hat) + options.eps));
    }
  }
}

template void adam_step<float>(std::span<Tensor<float>>, AdamState<float>&, const AdamOptions&);
template void adam_step<double>(std::span<Tensor<double>>, AdamState<double>&, const AdamOptions&);

}  // namespace precise
