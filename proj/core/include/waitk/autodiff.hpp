#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "waitk/kernels.hpp"
#include "waitk/tensor.hpp"

namespace waitk::ad {

// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode tape. Every op appends a node holding its value and, when
// recording, a closure that propagates the node's gradient into its inputs.
// Nodes may reference external tensors (parameters) without copying them;
// those tensors must outlive the tape.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Tensor value);
  // Leaf referencing an external tensor. Gradients accumulate on the tape
  // and are read back with grad().
  Var leaf(const Tensor& value);
  Var leaf_owned(Tensor value);

  const Tensor& value(Var v) const;
  // Gradient of a node, zero-initialized on first access.
  Tensor& grad(Var v);
  bool has_grad(Var v) const { return !nodes_[v.id].grad.empty(); }

  // Seeds d(loss)/d(loss) = 1 and runs every closure in reverse order.
  void backward(Var loss);

  using Backward = std::function<void(Tape&)>;
  Var push(Tensor value, Backward backward);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    Backward backward;
  };
  bool record_;
  std::vector<Node> nodes_;
};

Var add(Tape& t, Var a, Var b);
// a (n x m) + row vector b (m), broadcast over rows.
Var add_row(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var relu(Tape& t, Var a);
// a (n x k) * b (k x m).
Var matmul(Tape& t, Var a, Var b);
// a (n x k) * b^T where b is (m x k).
Var matmul_nt(Tape& t, Var a, Var b);
// x @ w + bias.
Var linear(Tape& t, Var x, Var w, Var bias);
// Row-wise layer norm with learned gain and bias.
Var layer_norm(Tape& t, Var x, Var gain, Var bias);
// Rows of `table` selected by ids.
Var gather_rows(Tape& t, Var table, std::span<const int> ids);
// Inverted dropout with a mask drawn from rng; identity when p == 0.
Var dropout(Tape& t, Var a, double p, std::mt19937_64& rng);
// Multi-head attention; query row i attends to key rows spans[i].
Var attention(Tape& t, Var q, Var k, Var v, std::size_t heads,
              std::vector<kernel::KeySpan> spans);
// Mean over rows of label-smoothed cross-entropy against `targets`:
// -(1 - eps) log p[y] - (eps / V) sum_v log p[v].
Var cross_entropy(Tape& t, Var logits, std::span<const int> targets, double smoothing);
// Sum of all elements (scalar).
Var sum(Tape& t, Var a);

}  // namespace waitk::ad
