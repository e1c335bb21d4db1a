#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kedit/activation.hpp"
#include "kedit/tensor.hpp"

namespace kedit::ad {

class Graph;

// Handle to a node in a Graph. Cheap to copy; only valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

// Dynamically recorded tape for first-order reverse-mode differentiation.
// Nodes are appended in topological order, so backward is a reverse sweep.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);  // differentiable input

  // Seeds d(output)/d(output) = 1 for a single-element output.
  void backward(Var output);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op implementations.
  Var push(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);
  Tensor& grad_mut(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_row_broadcast(Var a, Var row);  // a[T,n] + row[n]
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var activation(Var a, ActivationKind kind);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var embedding(Var table, std::span<const int> ids);
Var add_at_row(Var x, std::size_t row, Var vec);
Var sum(Var a);

// Multi-head causal self-attention on pre-projected q, k, v of shape [T, d].
// When `probs` is non-null it receives per-head attention matrices [T, T].
Var causal_attention(Var q, Var k, Var v, std::size_t n_heads, std::vector<Tensor>* probs = nullptr);

// Sum of −log softmax(logits[t])[targets[t]] over rows with targets[t] ≥ 0.
Var cross_entropy_sum(Var logits, std::span<const int> targets);

// Row-wise log-softmax of a plain tensor (no graph).
Tensor log_softmax_rows(const Tensor& logits);

}  // namespace kedit::ad
