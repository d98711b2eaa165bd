#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sgrad/param_vector.hpp"
#include "sgrad/tensor.hpp"

namespace sgrad {

class Tape;

// Handle to a tape node. Cheap to copy; valid while the tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;

  // Accumulated gradient; valid after Tape::backward. Zero tensor if no
  // gradient reached the node.
  Tensor grad() const;

  bool requires_grad() const;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run reverse-mode tape over Tensors, rebuilt per step. Ops evaluate
// eagerly, validate shapes, and reject non-finite outputs at the op boundary.
// backward() walks the nodes in reverse creation order — a topological order
// by construction — so gradient accumulation order is fixed and runs are
// reproducible bit-for-bit per seed.
//
// Primitive set: add, sub, mul, matmul, tanh, relu, square, sum, mean,
// concat, slice, broadcast-add (row_broadcast_add). This spans the denoiser
// network and both losses.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);     // elementwise
  Var matmul(Var a, Var b);  // [m,k] x [k,n] -> [m,n]
  Var tanh(Var a);
  Var relu(Var a);
  Var square(Var a);
  Var sum(Var a);   // -> rank-0 scalar
  Var mean(Var a);  // -> rank-0 scalar

  // Concatenate along the last axis. Rank-1: lengths add. Rank-2: column
  // blocks, row counts must match.
  Var concat(Var a, Var b);

  // Slice [first, first+count) along the last axis, same rank.
  Var slice(Var a, std::size_t first, std::size_t count);

  // m[i,j] + v[j] for every row i. m is rank-2, v rank-1.
  Var row_broadcast_add(Var m, Var v);

  // Seeds d(output)/d(output) = 1 and accumulates gradients into every node
  // with requires_grad reachability. `output` must be a scalar. One shot per
  // tape.
  void backward(Var output);

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kMatmul,
    kTanh,
    kRelu,
    kSquare,
    kSum,
    kMean,
    kConcat,
    kSlice,
    kRowBroadcastAdd,
  };

  struct Node {
    Op op = Op::kLeaf;
    std::size_t in0 = npos;
    std::size_t in1 = npos;
    std::size_t p0 = 0;  // op parameter (slice offset)
    std::size_t p1 = 0;  // op parameter (slice count)
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;
  };

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  friend class Var;

  Var push(Node node, const char* op_name);
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Tensor& grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Verification oracle for any differentiable loss: central differences per
// coordinate against the analytic gradient. Returns
//   max_i |analytic_i - central_i| / (|analytic_i| + 1e-12).
// Evaluates the loss twice at `at` first and throws if the two values differ
// (non-deterministic loss).
double finite_diff_check(const std::function<double(const ParamVector&)>& loss,
                         const std::function<ParamVector(const ParamVector&)>& gradient,
                         const ParamVector& at, double h);

}  // namespace sgrad
