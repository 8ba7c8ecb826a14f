#include "satire/params.hpp"

#include <cmath>

namespace satire {

template <typename T>
Tensor<T>& ParameterSet<T>::insert(const std::string& name, Tensor<T> t) {
  auto [it, inserted] = tensors_.emplace(name, std::move(t));
  if (!inserted) throw ConfigError("duplicate parameter name " + name);
  return it->second;
}

template <typename T>
Tensor<T>& ParameterSet<T>::add_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                                        std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
  return insert(name, std::move(t));
}

template <typename T>
Tensor<T>& ParameterSet<T>::add_constant(const std::string& name, Shape shape, T value) {
  return insert(name, Tensor<T>::filled(std::move(shape), value, true));
}

template <typename T>
Tensor<T>& ParameterSet<T>::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter " + name);
  return it->second;
}

template <typename T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter " + name);
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace satire
