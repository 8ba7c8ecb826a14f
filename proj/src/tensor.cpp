#include "satire/tensor.hpp"

#include <sstream>

namespace satire {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
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
Tensor<T>::Tensor(Shape s, std::vector<T> values, bool needs_grad)
    : shape(std::move(s)), data(std::move(values)), requires_grad(needs_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + shape_str(shape) + " has a zero dimension");
  }
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape s, bool needs_grad) {
  return filled(std::move(s), T(0), needs_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape s, T value, bool needs_grad) {
  const std::size_t n = shape_size(s);
  return Tensor(std::move(s), std::vector<T>(n, value), needs_grad);
}

template <typename T>
std::vector<T>& Tensor<T>::grad_buffer() {
  if (!grad) grad.emplace(data.size(), T(0));
  return *grad;
}

template struct Tensor<float>;
template struct Tensor<double>;

}  // namespace satire
