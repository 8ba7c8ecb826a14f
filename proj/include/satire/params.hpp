#pragma once

#include <map>
#include <string>
#include <vector>

#include "satire/rng.hpp"
#include "satire/tensor.hpp"

namespace satire {

// Named learnable tensors, ordered by name so that iteration (checkpoints,
// optimizer updates) is deterministic.
template <typename T>
class ParameterSet {
 public:
  // Glorot-uniform in +-sqrt(6 / (fan_in + fan_out)).
  Tensor<T>& add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                         std::size_t fan_out, Rng& rng);
  Tensor<T>& add_constant(const std::string& name, Shape shape, T value);

  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  std::map<std::string, Tensor<T>>& tensors() { return tensors_; }
  const std::map<std::string, Tensor<T>>& tensors() const { return tensors_; }

  std::size_t count() const;  // total scalar parameters
  void zero_grad();

  // Copies values (not grads) into another precision; shapes must agree.
  template <typename U>
  void copy_values_to(ParameterSet<U>& other) const {
    for (const auto& [name, t] : tensors_) {
      auto& dst = other.at(name);
      if (dst.shape != t.shape) {
        throw DimensionError("parameter " + name + " shape " + shape_str(t.shape) + " vs " +
                             shape_str(dst.shape));
      }
      dst.data.assign(t.data.begin(), t.data.end());
    }
  }

 private:
  Tensor<T>& insert(const std::string& name, Tensor<T> t);
  std::map<std::string, Tensor<T>> tensors_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace satire
