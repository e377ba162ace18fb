#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "precise/tensor.hpp"

namespace precise {

enum class ElementwiseOp { kAdd, kSub, kMul, kScalarMul, kRelu, kSigmoid, kExp };
enum class ReduceOp { kSum, kMean, kMin };

// Parses the textual tags used by the gradient-check report ("add", "relu",
// ...). Throws std::invalid_argument on an unknown tag.
ElementwiseOp parse_elementwise_op(std::string_view tag);
ReduceOp parse_reduce_op(std::string_view tag);
std::string_view to_string(ElementwiseOp op);
std::string_view to_string(ReduceOp op);

// Guard added under the square root of the distance kernel's derivative.
inline constexpr double kDistanceEpsilon = 1e-12;

enum class Recording { kOn, kOff };

// Records executed operations and replays them in reverse to propagate
// gradients. A tape and every tensor it produces belong to one thread.
//
// Inputs of a recorded operation must not be mutated between the forward
// call and backward(); backward rules read them in place.
template <typename T>
class Tape {
 public:
  explicit Tape(Recording recording = Recording::kOn) : recording_(recording == Recording::kOn) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> transpose(const Tensor<T>& a);

  Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a);
  Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(ElementwiseOp::kAdd, a, b); }
  Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(ElementwiseOp::kSub, a, b); }
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(ElementwiseOp::kMul, a, b); }
  Tensor<T> relu(const Tensor<T>& a) { return elementwise(ElementwiseOp::kRelu, a); }
  Tensor<T> sigmoid(const Tensor<T>& a) { return elementwise(ElementwiseOp::kSigmoid, a); }
  Tensor<T> exp(const Tensor<T>& a) { return elementwise(ElementwiseOp::kExp, a); }
  Tensor<T> scale(const Tensor<T>& a, T factor);

  // a[r x c] + v[c], broadcasting v over rows.
  Tensor<T> add_row_vector(const Tensor<T>& a, const Tensor<T>& v);
  Tensor<T> clamp_min(const Tensor<T>& a, T floor);

  // Reduction over all elements (result shape [1]) or along one axis of a
  // rank-2 tensor (result shape [extent of the other axis]). Min routes the
  // gradient to the lowest-index minimizer.
  Tensor<T> reduce(ReduceOp op, const Tensor<T>& a, std::optional<std::size_t> axis = std::nullopt);
  Tensor<T> sum(const Tensor<T>& a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceOp::kSum, a, axis);
  }
  Tensor<T> mean(const Tensor<T>& a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceOp::kMean, a, axis);
  }
  Tensor<T> min(const Tensor<T>& a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceOp::kMin, a, axis);
  }

  // out.flat[k] = a.flat[indices[k]], reshaped to `shape`.
  Tensor<T> gather(const Tensor<T>& a, std::span<const std::size_t> indices, Shape shape);

  // out[i][j] = ||a_i - b_j||_2 for a[p x d], b[q x d].
  Tensor<T> euclidean_distance_rows(const Tensor<T>& a, const Tensor<T>& b);

  Tensor<T> log_softmax(const Tensor<T>& a);

  // Reverse sweep from a scalar produced on this tape. Leaf gradients
  // accumulate across calls; intermediate gradients are reset each call.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return records_.size(); }
  std::vector<std::string_view> op_names() const;

  // Smallest distance of any recorded input to a non-differentiable point
  // (relu/clamp at the threshold, a min tie, a zero distance).
  double kink_margin() const { return kink_margin_; }

 private:
  struct Record {
    std::string_view name;
    std::shared_ptr<TensorStorage<T>> output;
    std::vector<std::shared_ptr<TensorStorage<T>>> inputs;
    std::function<void()> backward;
  };

  bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) const;
  Tensor<T> finish(std::string_view name, Tensor<T> out, std::initializer_list<const Tensor<T>*> inputs,
                   std::function<void()> backward);
  void note_kink(double margin);

  bool recording_;
  std::vector<Record> records_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace precise
