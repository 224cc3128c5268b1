#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "evsteer/tensor.hpp"

namespace evsteer {

/// Handle to a node on a Graph.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape over Tensor-valued operations. Nodes are appended in
/// evaluation order, so walking the tape backwards is a valid topological
/// order for backpropagation.
///
/// Layout conventions: images are (N, C, H, W); dense activations are (N, F);
/// conv weights are (O, C, k, k); linear weights are (O, I).
class Graph {
 public:
  Graph() = default;
  // Backward closures refer back to the owning graph.
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value);
  /// Leaf whose gradient is accumulated by backward().
  Var parameter(Tensor value);

  /// Square-kernel convolution with zero padding.
  Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad);
  Var relu(Var x);
  Var add(Var a, Var b);
  /// Channel-wise spatial mean: (N, C, H, W) -> (N, C).
  Var global_avg_pool(Var x);
  Var linear(Var x, Var weight, Var bias);
  /// Mean over the batch of (pred - target)^2; pred is (N, 1) or (N).
  Var mse(Var pred, std::span<const double> targets);

  /// Seeds d(root)/d(root) = 1; root must hold a single value.
  void backward(Var root);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Zero tensor of the value's shape when no gradient reached the node.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Var push(Tensor value, bool requires_grad);
  Tensor& grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace evsteer
