#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "satire/tensor.hpp"

namespace satire {

template <typename T>
class Graph;

// Handle to one node of a Graph. Cheap to copy; valid as long as the graph.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Shape& shape() const;
  std::span<const T> value() const;
  std::size_t size() const { return value().size(); }
  T item() const;
  std::size_t dim(std::size_t i) const { return shape().at(i); }
};

// Append-only tape of operations. Node ids are assigned in creation order, so
// every input id precedes its consumer and reverse id order is a valid
// reverse topological order.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Shape shape, std::vector<T> values);
  Var<T> constant(const Tensor<T>& t);

  // Leaf that aliases a parameter tensor. Its gradient is accumulated
  // directly into `p.grad`, which lets several backward passes (one per
  // sample of a batch) sum into the same buffer.
  Var<T> param(Tensor<T>& p);

  Var<T> record(std::string op, Shape shape, std::vector<T> value,
                std::vector<std::size_t> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and runs every reachable backward rule once in
  // reverse creation order.
  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }
  const std::string& op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  const Shape& shape(std::size_t id) const { return nodes_.at(id).shape; }
  std::span<const T> value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  bool has_grad(std::size_t id) const;
  std::span<const T> grad(std::size_t id) const;
  // Gradient accumulator of node `id`, allocated (zeroed) on first access.
  std::span<T> grad_mut(std::size_t id);

 private:
  struct Node {
    std::string op;
    Shape shape;
    std::vector<T> owned;
    Tensor<T>* param = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;
extern template struct Var<float>;
extern template struct Var<double>;

}  // namespace satire
