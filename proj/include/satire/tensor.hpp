#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satire/errors.hpp"

namespace satire {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class Precision { single, dual };

// Dense row-major array. Learned parameters live in Tensors with
// requires_grad set; `grad` stays empty until a backward pass reaches them.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::optional<std::vector<T>> grad;

  Tensor() = default;
  Tensor(Shape s, std::vector<T> values, bool needs_grad = false);

  static Tensor zeros(Shape s, bool needs_grad = false);
  static Tensor filled(Shape s, T value, bool needs_grad = false);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  std::span<T> values() { return data; }
  std::span<const T> values() const { return data; }

  void zero_grad() { grad.reset(); }

  // Allocates a zero gradient on first use.
  std::vector<T>& grad_buffer();

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    out.requires_grad = requires_grad;
    return out;
  }
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace satire
