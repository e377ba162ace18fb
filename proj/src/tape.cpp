#include "precise/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "precise/errors.hpp"

namespace precise {

ElementwiseOp parse_elementwise_op(std::string_view tag) {
  if (tag == "add") return ElementwiseOp::kAdd;
  if (tag == "sub") return ElementwiseOp::kSub;
  if (tag == "mul") return ElementwiseOp::kMul;
  if (tag == "scalar-mul") return ElementwiseOp::kScalarMul;
  if (tag == "relu") return ElementwiseOp::kRelu;
  if (tag == "sigmoid") return ElementwiseOp::kSigmoid;
  if (tag == "exp") return ElementwiseOp::kExp;
  throw std::invalid_argument("unknown elementwise op tag '" + std::string(tag) + "'");
}

ReduceOp parse_reduce_op(std::string_view tag) {
  if (tag == "sum") return ReduceOp::kSum;
  if (tag == "mean") return ReduceOp::kMean;
  if (tag == "min") return ReduceOp::kMin;
  throw std::invalid_argument("unknown reduce op tag '" + std::string(tag) + "'");
}

std::string_view to_string(ElementwiseOp op) {
  switch (op) {
    case ElementwiseOp::kAdd: return "add";
    case ElementwiseOp::kSub: return "sub";
    case ElementwiseOp::kMul: return "mul";
    case ElementwiseOp::kScalarMul: return "scalar-mul";
    case ElementwiseOp::kRelu: return "relu";
    case ElementwiseOp::kSigmoid: return "sigmoid";
    case ElementwiseOp::kExp: return "exp";
  }
  return "?";
}

std::string_view to_string(ReduceOp op) {
  switch (op) {
    case ReduceOp::kSum: return "sum";
    case ReduceOp::kMean: return "mean";
    case ReduceOp::kMin: return "min";
  }
  return "?";
}

namespace {

template <typename T>
std::vector<T>& grad_buffer(TensorStorage<T>& s) {
  if (s.grad.empty()) s.grad.assign(s.values.size(), T(0));
  return s.grad;
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

void require_rank2(std::string_view op, const Shape& shape) {
  if (shape.size() != 2) throw_shape_error(std::string(op), "expected a matrix, got " + shape_string(shape));
}

}  // namespace

template <typename T>
bool Tape<T>::any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void Tape<T>::note_kink(double margin) {
  kink_margin_ = std::min(kink_margin_, margin);
}

template <typename T>
Tensor<T> Tape<T>::finish(std::string_view name, Tensor<T> out, std::initializer_list<const Tensor<T>*> inputs,
                          std::function<void()> backward) {
  for (T v : out.values()) {
    if (!std::isfinite(v)) throw NumericalError(std::string(name) + ": non-finite value in output");
  }
  if (!any_requires_grad(inputs)) return out;
  out.storage().requires_grad = true;
  out.storage().is_leaf = false;
  Record rec{name, out.storage_ptr(), {}, std::move(backward)};
  for (const Tensor<T>* in : inputs) rec.inputs.push_back(in->storage_ptr());
  records_.push_back(std::move(rec));
  return out;
}

template <typename T>
Tensor<T> Tape<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2("matmul", a.shape());
  require_rank2("matmul", b.shape());
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  if (b.rows() != k) {
    throw_shape_error("matmul", "inner extents differ: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  std::vector<T> out(r * c, T(0));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < r; ++i) {
    T* orow = out.data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      const T* brow = bv.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) orow[j] += aip * brow[j];
    }
  }
  Tensor<T> result = Tensor<T>::matrix(r, c, std::move(out));
  auto as = a.storage_ptr(), bs = b.storage_ptr(), os = result.storage_ptr();
  return finish("matmul", result, {&a, &b}, [as, bs, os, r, k, c] {
    const auto& g = os->grad;
    if (as->requires_grad) {
      auto& ga = grad_buffer(*as);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          T acc = 0;
          for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * bs->values[p * c + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (bs->requires_grad) {
      auto& gb = grad_buffer(*bs);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = as->values[i * k + p];
          for (std::size_t j = 0; j < c; ++j) gb[p * c + j] += aip * g[i * c + j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> Tape<T>::transpose(const Tensor<T>& a) {
  require_rank2("transpose", a.shape());
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.at(i, j);
  Tensor<T> result = Tensor<T>::matrix(c, r, std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  return finish("transpose", result, {&a}, [as, os, r, c] {
    auto& ga = grad_buffer(*as);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += os->grad[j * r + i];
  });
}

template <typename T>
Tensor<T> Tape<T>::elementwise(ElementwiseOp op, const Tensor<T>& a) {
  const std::size_t n = a.size();
  std::vector<T> out(n);
  const auto av = a.values();
  switch (op) {
    case ElementwiseOp::kRelu: {
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
      if (any_requires_grad({&a})) {
        double margin = std::numeric_limits<double>::infinity();
        for (T v : av) margin = std::min(margin, std::abs(static_cast<double>(v)));
        note_kink(margin);
      }
      break;
    }
    case ElementwiseOp::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_value(av[i]);
      break;
    case ElementwiseOp::kExp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(av[i]);
      break;
    default:
      throw std::invalid_argument("elementwise: op '" + std::string(to_string(op)) + "' is not unary");
  }
  Tensor<T> result(a.shape(), std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  return finish(to_string(op), result, {&a}, [op, as, os, n] {
    auto& ga = grad_buffer(*as);
    const auto& g = os->grad;
    for (std::size_t i = 0; i < n; ++i) {
      switch (op) {
        case ElementwiseOp::kRelu:
          if (as->values[i] > T(0)) ga[i] += g[i];
          break;
        case ElementwiseOp::kSigmoid: {
          const T s = os->values[i];
          ga[i] += g[i] * s * (T(1) - s);
          break;
        }
        default:  // exp
          ga[i] += g[i] * os->values[i];
      }
    }
  });
}

template <typename T>
Tensor<T> Tape<T>::elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
  if (op != ElementwiseOp::kAdd && op != ElementwiseOp::kSub && op != ElementwiseOp::kMul &&
      op != ElementwiseOp::kScalarMul) {
    throw std::invalid_argument("elementwise: op '" + std::string(to_string(op)) + "' is not binary");
  }
  if (op == ElementwiseOp::kScalarMul) {
    if (b.size() != 1) throw_shape_error("scalar-mul", "second operand must be a scalar, got " + shape_string(b.shape()));
    op = ElementwiseOp::kMul;
  }
  const bool broadcast_a = a.size() == 1 && b.size() != 1;
  const bool broadcast_b = b.size() == 1 && a.size() != 1;
  if (!broadcast_a && !broadcast_b && a.shape() != b.shape()) {
    throw_shape_error(std::string(to_string(op)),
                      "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const Shape shape = broadcast_a ? b.shape() : a.shape();
  const std::size_t n = element_count(shape);
  const std::size_t sa = broadcast_a ? 0 : 1, sb = broadcast_b ? 0 : 1;
  std::vector<T> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    const T x = av[i * sa], y = bv[i * sb];
    out[i] = op == ElementwiseOp::kAdd ? x + y : op == ElementwiseOp::kSub ? x - y : x * y;
  }
  Tensor<T> result(shape, std::move(out));
  auto as = a.storage_ptr(), bs = b.storage_ptr(), os = result.storage_ptr();
  return finish(to_string(op), result, {&a, &b}, [op, as, bs, os, n, sa, sb] {
    const auto& g = os->grad;
    if (as->requires_grad) {
      auto& ga = grad_buffer(*as);
      for (std::size_t i = 0; i < n; ++i) {
        ga[i * sa] += op == ElementwiseOp::kMul ? g[i] * bs->values[i * sb] : g[i];
      }
    }
    if (bs->requires_grad) {
      auto& gb = grad_buffer(*bs);
      for (std::size_t i = 0; i < n; ++i) {
        const T d = op == ElementwiseOp::kMul ? g[i] * as->values[i * sa] : op == ElementwiseOp::kSub ? -g[i] : g[i];
        gb[i * sb] += d;
      }
    }
  });
}

template <typename T>
Tensor<T> Tape<T>::scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (T& v : out) v *= factor;
  Tensor<T> result(a.shape(), std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  return finish("scalar-mul", result, {&a}, [as, os, factor] {
    auto& ga = grad_buffer(*as);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * os->grad[i];
  });
}

template <typename T>
Tensor<T> Tape<T>::add_row_vector(const Tensor<T>& a, const Tensor<T>& v) {
  require_rank2("add_row_vector", a.shape());
  const std::size_t r = a.rows(), c = a.cols();
  if (v.size() != c) {
    throw_shape_error("add_row_vector", "row vector " + shape_string(v.shape()) + " vs matrix " + shape_string(a.shape()));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  const auto vv = v.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
  Tensor<T> result = Tensor<T>::matrix(r, c, std::move(out));
  auto as = a.storage_ptr(), vs = v.storage_ptr(), os = result.storage_ptr();
  return finish("add_row_vector", result, {&a, &v}, [as, vs, os, r, c] {
    const auto& g = os->grad;
    if (as->requires_grad) {
      auto& ga = grad_buffer(*as);
      for (std::size_t i = 0; i < r * c; ++i) ga[i] += g[i];
    }
    if (vs->requires_grad) {
      auto& gv = grad_buffer(*vs);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
    }
  });
}

template <typename T>
Tensor<T> Tape<T>::clamp_min(const Tensor<T>& a, T floor) {
  std::vector<T> out(a.values().begin(), a.values().end());
  double margin = std::numeric_limits<double>::infinity();
  for (T& v : out) {
    margin = std::min(margin, std::abs(static_cast<double>(v) - static_cast<double>(floor)));
    v = std::max(v, floor);
  }
  if (any_requires_grad({&a})) note_kink(margin);
  Tensor<T> result(a.shape(), std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  return finish("clamp_min", result, {&a}, [as, os, floor] {
    auto& ga = grad_buffer(*as);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (as->values[i] > floor) ga[i] += os->grad[i];
  });
}

template <typename T>
Tensor<T> Tape<T>::reduce(ReduceOp op, const Tensor<T>& a, std::optional<std::size_t> axis) {
  // Express both modes as `groups` reductions of `extent` elements each, where
  // element e of group g sits at flat index g * outer_stride + e * inner_stride.
  std::size_t groups = 1, extent = a.size(), outer_stride = 0, inner_stride = 1;
  if (axis) {
    if (a.rank() != 2 || *axis > 1) {
      throw_shape_error(std::string(to_string(op)),
                        "invalid axis " + std::to_string(*axis) + " for " + shape_string(a.shape()));
    }
    const std::size_t r = a.rows(), c = a.cols();
    if (*axis == 0) {
      groups = c, extent = r, outer_stride = 1, inner_stride = c;
    } else {
      groups = r, extent = c, outer_stride = c, inner_stride = 1;
    }
  }
  if (extent == 0) throw_shape_error(std::string(to_string(op)), "reduction over an empty extent");

  const auto av = a.values();
  std::vector<T> out(groups);
  std::vector<std::size_t> argmin;
  if (op == ReduceOp::kMin) argmin.resize(groups);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * outer_stride;
    if (op == ReduceOp::kMin) {
      std::size_t best = base;
      double runner_up = std::numeric_limits<double>::infinity();
      for (std::size_t e = 1; e < extent; ++e) {
        const std::size_t idx = base + e * inner_stride;
        if (av[idx] < av[best]) {
          runner_up = std::min(runner_up, static_cast<double>(av[best]));
          best = idx;
        } else {
          runner_up = std::min(runner_up, static_cast<double>(av[idx]));
        }
      }
      out[g] = av[best];
      argmin[g] = best;
      margin = std::min(margin, runner_up - static_cast<double>(av[best]));
    } else {
      T acc = 0;
      for (std::size_t e = 0; e < extent; ++e) acc += av[base + e * inner_stride];
      out[g] = op == ReduceOp::kMean ? acc / static_cast<T>(extent) : acc;
    }
  }
  if (op == ReduceOp::kMin && any_requires_grad({&a})) note_kink(margin);

  Tensor<T> result(Shape{groups}, std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  return finish(to_string(op), result, {&a},
                [op, as, os, groups, extent, outer_stride, inner_stride, argmin = std::move(argmin)] {
                  auto& ga = grad_buffer(*as);
                  const auto& g = os->grad;
                  for (std::size_t k = 0; k < groups; ++k) {
                    if (op == ReduceOp::kMin) {
                      ga[argmin[k]] += g[k];
                      continue;
                    }
                    const T d = op == ReduceOp::kMean ? g[k] / static_cast<T>(extent) : g[k];
                    for (std::size_t e = 0; e < extent; ++e) ga[k * outer_stride + e * inner_stride] += d;
                  }
                });
}

template <typename T>
Tensor<T> Tape<T>::gather(const Tensor<T>& a, std::span<const std::size_t> indices, Shape shape) {
  if (element_count(shape) != indices.size()) {
    throw_shape_error("gather", std::to_string(indices.size()) + " indices for shape " + shape_string(shape));
  }
  std::vector<T> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= a.size()) throw_shape_error("gather", "index " + std::to_string(indices[k]) + " out of range");
    out[k] = a.at(indices[k]);
  }
  Tensor<T> result(std::move(shape), std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return finish("gather", result, {&a}, [as, os, idx = std::move(idx)] {
    auto& ga = grad_buffer(*as);
    for (std::size_t k = 0; k < idx.size(); ++k) ga[idx[k]] += os->grad[k];
  });
}

template <typename T>
Tensor<T> Tape<T>::euclidean_distance_rows(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2("euclidean_distance_rows", a.shape());
  require_rank2("euclidean_distance_rows", b.shape());
  const std::size_t p = a.rows(), q = b.rows(), d = a.cols();
  if (b.cols() != d) {
    throw_shape_error("euclidean_distance_rows",
                      "feature extents differ: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(p * q);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      T s = 0;
      for (std::size_t t = 0; t < d; ++t) {
        const T diff = av[i * d + t] - bv[j * d + t];
        s += diff * diff;
      }
      out[i * q + j] = std::sqrt(s);
      margin = std::min(margin, static_cast<double>(out[i * q + j]));
    }
  }
  if (any_requires_grad({&a, &b})) note_kink(margin);
  Tensor<T> result = Tensor<T>::matrix(p, q, std::move(out));
  auto as = a.storage_ptr(), bs = b.storage_ptr(), os = result.storage_ptr();
  return finish("euclidean_distance_rows", result, {&a, &b}, [as, bs, os, p, q, d] {
    const T eps = static_cast<T>(kDistanceEpsilon);
    std::vector<T>* ga = as->requires_grad ? &grad_buffer(*as) : nullptr;
    std::vector<T>* gb = bs->requires_grad ? &grad_buffer(*bs) : nullptr;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < q; ++j) {
        const T dist = os->values[i * q + j];
        const T coef = os->grad[i * q + j] / std::sqrt(dist * dist + eps);
        if (coef == T(0)) continue;
        for (std::size_t t = 0; t < d; ++t) {
          const T diff = as->values[i * d + t] - bs->values[j * d + t];
          if (ga) (*ga)[i * d + t] += coef * diff;
          if (gb) (*gb)[j * d + t] -= coef * diff;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> Tape<T>::log_softmax(const Tensor<T>& a) {
  require_rank2("log_softmax", a.shape());
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = av.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T acc = 0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(row[j] - mx);
    const T lse = mx + std::log(acc);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  Tensor<T> result = Tensor<T>::matrix(r, c, std::move(out));
  auto as = a.storage_ptr(), os = result.storage_ptr();
  return finish("log_softmax", result, {&a}, [as, os, r, c] {
    auto& ga = grad_buffer(*as);
    const auto& g = os->grad;
    for (std::size_t i = 0; i < r; ++i) {
      T gsum = 0;
      for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] - std::exp(os->values[i * c + j]) * gsum;
    }
  });
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw_shape_error("backward", "loss must be a scalar, got " + shape_string(loss.shape()));
  const auto it = std::find_if(records_.rbegin(), records_.rend(),
                               [&](const Record& r) { return r.output == loss.storage_ptr(); });
  if (it == records_.rend()) throw std::logic_error("backward: loss was not produced on this tape");

  // Only leaf gradients persist between sweeps.
  for (Record& rec : records_) rec.output->grad.assign(rec.output->values.size(), T(0));
  for (Record& rec : records_) {
    for (auto& in : rec.inputs) {
      if (in->requires_grad && in->is_leaf) grad_buffer(*in);
    }
  }
  loss.storage().grad[0] = T(1);
  for (auto rec = it; rec != records_.rend(); ++rec) rec->backward();
}

template <typename T>
std::vector<std::string_view> Tape<T>::op_names() const {
  std::vector<std::string_view> names;
  names.reserve(records_.size());
  for (const Record& r : records_) names.push_back(r.name);
  return names;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace precise
