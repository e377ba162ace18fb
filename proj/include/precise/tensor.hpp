#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace precise {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  bool is_leaf = true;
};

// Reference-counted handle to an n-dimensional buffer. Copies alias the same
// storage (parameters are shared between a model and the tapes that read it);
// use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t size() const { return data_->values.size(); }
  // Extents of a rank-2 tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> values() const { return data_->values; }
  std::span<T> mutable_values() { return data_->values; }
  T item() const;
  T at(std::size_t i) const { return data_->values[i]; }
  T at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return data_->requires_grad; }
  bool is_leaf() const { return data_->is_leaf; }
  bool has_grad() const { return !data_->grad.empty(); }
  std::span<const T> grad() const { return data_->grad; }
  std::span<T> mutable_grad() { return data_->grad; }
  void zero_grad();
  void clear_grad() { data_->grad.clear(); }

  Tensor clone() const;
  bool shares_storage(const Tensor& other) const { return data_ == other.data_; }

  TensorStorage<T>& storage() const { return *data_; }
  const std::shared_ptr<TensorStorage<T>>& storage_ptr() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<TensorStorage<T>> data) : data_(std::move(data)) {}
  template <typename U>
  friend class Tape;

  std::shared_ptr<TensorStorage<T>> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace precise
