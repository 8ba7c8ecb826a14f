#include "satire/graph.hpp"

namespace satire {

template <typename T>
const Shape& Var<T>::shape() const {
  return graph->shape(id);
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return graph->value(id);
}

template <typename T>
T Var<T>::item() const {
  auto v = value();
  if (v.size() != 1) throw UsageError("item() on non-scalar of shape " + shape_str(shape()));
  return v[0];
}

template <typename T>
Var<T> Graph<T>::constant(Shape shape, std::vector<T> values) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("constant shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  Node n;
  n.op = "constant";
  n.shape = std::move(shape);
  n.owned = std::move(values);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::constant(const Tensor<T>& t) {
  return constant(t.shape, t.data);
}

template <typename T>
Var<T> Graph<T>::param(Tensor<T>& p) {
  Node n;
  n.op = "param";
  n.shape = p.shape;
  n.param = &p;
  n.requires_grad = p.requires_grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::record(std::string op, Shape shape, std::vector<T> value,
                        std::vector<std::size_t> inputs, BackwardFn backward) {
  if (shape_size(shape) != value.size()) {
    throw DimensionError(op + ": output shape " + shape_str(shape) + " does not match " +
                         std::to_string(value.size()) + " values");
  }
  Node n;
  n.op = std::move(op);
  n.shape = std::move(shape);
  n.owned = std::move(value);
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw UsageError(n.op + ": input id out of range");
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename T>
std::span<const T> Graph<T>::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.param) return n.param->data;
  return n.owned;
}

template <typename T>
bool Graph<T>::has_grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.param) return n.param->grad.has_value();
  return !n.grad.empty();
}

template <typename T>
std::span<const T> Graph<T>::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.param) {
    if (!n.param->grad) return {};
    return *n.param->grad;
  }
  return n.grad;
}

template <typename T>
std::span<T> Graph<T>::grad_mut(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.param) return n.param->grad_buffer();
  if (n.grad.empty()) n.grad.assign(shape_size(n.shape), T(0));
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (loss.graph != this) throw UsageError("backward: loss belongs to a different graph");
  if (shape_size(shape(loss.id)) != 1) {
    throw UsageError("backward: loss must be a scalar, got shape " + shape_str(shape(loss.id)));
  }
  if (!nodes_[loss.id].requires_grad) return;
  grad_mut(loss.id)[0] += T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

template class Graph<float>;
template class Graph<double>;
template struct Var<float>;
template struct Var<double>;

}  // namespace satire
