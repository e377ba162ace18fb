#include "precise/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "precise/errors.hpp"

namespace precise {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw_shape_error("Tensor", "zero extent in " + shape_string(shape));
  }
  if (element_count(shape) != values.size()) {
    throw_shape_error("Tensor", "shape " + shape_string(shape) + " needs " +
                                    std::to_string(element_count(shape)) + " values, got " +
                                    std::to_string(values.size()));
  }
  data_ = std::make_shared<TensorStorage<T>>();
  data_->shape = std::move(shape);
  data_->values = std::move(values);
  data_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::size_t rows, std::size_t cols, std::vector<T> values,
                            bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (rank() != 2) throw_shape_error("rows", "expected rank 2, got " + shape_string(shape()));
  return data_->shape[0];
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (rank() != 2) throw_shape_error("cols", "expected rank 2, got " + shape_string(shape()));
  return data_->shape[1];
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw_shape_error("item", "tensor " + shape_string(shape()) + " is not a scalar");
  return data_->values[0];
}

template <typename T>
T Tensor<T>::at(std::size_t r, std::size_t c) const {
  return data_->values[r * cols() + c];
}

template <typename T>
void Tensor<T>::zero_grad() {
  data_->grad.assign(data_->values.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto copy = std::make_shared<TensorStorage<T>>(*data_);
  return Tensor(std::move(copy));
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace precise
