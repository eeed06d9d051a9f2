#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsta/tensor.hpp"

namespace hsta {

/// A learnable tensor together with its gradient accumulator.
struct Param {
  Param() = default;
  Param(std::string name, Tensor value) : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
  std::size_t size() const { return value.size(); }

  std::string name;
  Tensor value;
  Tensor grad;
};

/// Primitive kinds recorded on a tape.
enum class Op {
  constant,
  param,
  matmul,
  matmul_nt,
  add,
  add_row,
  scale,
  softmax_rows,
  layer_norm,
  concat_rows,
  slice_rows,
  gelu,
  sum,
  weighted_sum,
  mse,
};

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Ordered record of primitive applications. Nodes are appended in
/// evaluation order, so reverse index order is a reverse topological order.
class Tape {
 public:
  /// Receives the tape, the node's own id and its upstream gradient.
  using BackwardFn = std::function<void(Tape&, std::size_t self, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a Param; backward() accumulates into p.grad. The Param
  /// must outlive the tape.
  Var param(Param& p);

  const Tensor& value(std::size_t id) const;
  /// Gradient of the last backward() target with respect to v. Zeros when
  /// v was not reached.
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  Op op(std::size_t id) const { return nodes_[id].op; }

  Var record(Op op, Tensor value, BackwardFn fn);
  /// Accumulator for node id's gradient, allocated on first use.
  Tensor& grad_slot(std::size_t id);

  friend void backward(Tape& tape, Var loss);

 private:
  struct Node {
    Op op = Op::constant;
    Tensor own;
    const Tensor* ref = nullptr;
    Param* param = nullptr;
    Tensor grad;
    bool has_grad = false;
    BackwardFn fn;
  };
  std::deque<Node> nodes_;
};

/// Reverse sweep from a scalar loss. Parameter gradients accumulate across
/// calls; node gradients are recomputed each call.
void backward(Tape& tape, Var loss);

/// Flip the sign of every gradient a given primitive propagates (nullopt
/// clears). Used to prove the gradient checker catches broken rules.
void inject_backward_fault(std::optional<Op> op);
std::optional<Op> backward_fault();

// Differentiable primitives.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var operator+(Var a, Var b);
/// x (m x n) plus a 1 x n row broadcast over rows.
Var add_row(Var x, Var bias);
Var scale(Var x, double s);
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps = kLayerNormEps);
Var concat_rows(Var a, Var b);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
std::pair<Var, Var> split_rows(Var x, std::size_t p);
Var gelu(Var x);
/// Sum of all elements as a 1 x 1 tensor.
Var sum(Var x);
/// sum(x * w) for a constant w of the same shape, as 1 x 1.
Var weighted_sum(Var x, const Tensor& w);
/// Mean over the C coordinates of (logit - onehot(label))^2, as 1 x 1.
Var mse_loss(Var logits, std::size_t label);

/// Central-difference estimate of d f / d p, one coordinate at a time.
/// f must read p.value; p.value is restored bitwise afterwards.
Tensor finite_diff_grad(const std::function<double()>& f, Param& p, double step);

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|): the largest
/// coordinate error relative to the gradient group's scale. Zero when both
/// tensors vanish.
double relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace hsta
