#include "sgrad/autodiff.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <utility>

#include "sgrad/error.hpp"

namespace sgrad {
namespace {

// C[m,n] += A[m,k] * B[k,n]
void matmul_acc_nn(std::span<double> c, std::span<const double> a, std::span<const double> b,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += A[m,n] * B^T where B is [k,n]
void matmul_acc_nt(std::span<double> c, std::span<const double> a, std::span<const double> b,
                   std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * n;
    double* crow = c.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n]
void matmul_acc_tn(std::span<double> c, std::span<const double> a, std::span<const double> b,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * k;
    const double* brow = b.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const Tensor& Var::value() const { return tape_->node(id_).value; }

Tensor Var::grad() const {
  const auto& n = tape_->node(id_);
  if (!n.grad_live) return Tensor::zeros(n.value.shape());
  return n.grad;
}

bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::push(Node node, const char* op_name) {
  if (!node.value.all_finite()) {
    throw NonFiniteError(std::string("autodiff: non-finite value produced by op '") + op_name +
                         "'");
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_live = true;
  }
  return n.grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n), "leaf");
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

Var Tape::add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Node n;
  n.op = Op::kAdd;
  n.in0 = a.id();
  n.in1 = b.id();
  n.requires_grad = a.requires_grad() || b.requires_grad();
  Tensor out = a.value();
  auto d = out.data();
  auto db = b.value().data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += db[i];
  n.value = std::move(out);
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Node n;
  n.op = Op::kSub;
  n.in0 = a.id();
  n.in1 = b.id();
  n.requires_grad = a.requires_grad() || b.requires_grad();
  Tensor out = a.value();
  auto d = out.data();
  auto db = b.value().data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= db[i];
  n.value = std::move(out);
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Node n;
  n.op = Op::kMul;
  n.in0 = a.id();
  n.in1 = b.id();
  n.requires_grad = a.requires_grad() || b.requires_grad();
  Tensor out = a.value();
  auto d = out.data();
  auto db = b.value().data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= db[i];
  n.value = std::move(out);
  return push(std::move(n), "mul");
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(ta.shape()) + " x " +
                     shape_string(tb.shape()));
  }
  Node n;
  n.op = Op::kMatmul;
  n.in0 = a.id();
  n.in1 = b.id();
  n.requires_grad = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::zeros({ta.rows(), tb.cols()});
  matmul_acc_nn(out.data(), ta.data(), tb.data(), ta.rows(), ta.cols(), tb.cols());
  n.value = std::move(out);
  return push(std::move(n), "matmul");
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.in0 = a.id();
  n.requires_grad = a.requires_grad();
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  n.value = std::move(out);
  return push(std::move(n), "tanh");
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.in0 = a.id();
  n.requires_grad = a.requires_grad();
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  n.value = std::move(out);
  return push(std::move(n), "relu");
}

Var Tape::square(Var a) {
  Node n;
  n.op = Op::kSquare;
  n.in0 = a.id();
  n.requires_grad = a.requires_grad();
  Tensor out = a.value();
  for (double& v : out.data()) v = v * v;
  n.value = std::move(out);
  return push(std::move(n), "square");
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.in0 = a.id();
  n.requires_grad = a.requires_grad();
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  n.value = Tensor::scalar(acc);
  return push(std::move(n), "sum");
}

Var Tape::mean(Var a) {
  Node n;
  n.op = Op::kMean;
  n.in0 = a.id();
  n.requires_grad = a.requires_grad();
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  n.value = Tensor::scalar(acc / static_cast<double>(a.value().size()));
  return push(std::move(n), "mean");
}

Var Tape::concat(Var a, Var b) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  Node n;
  n.op = Op::kConcat;
  n.in0 = a.id();
  n.in1 = b.id();
  n.requires_grad = a.requires_grad() || b.requires_grad();
  if (ta.rank() == 1 && tb.rank() == 1) {
    Tensor out = Tensor::zeros({ta.size() + tb.size()});
    auto d = out.data();
    auto da = ta.data();
    auto db = tb.data();
    for (std::size_t i = 0; i < da.size(); ++i) d[i] = da[i];
    for (std::size_t i = 0; i < db.size(); ++i) d[da.size() + i] = db[i];
    n.value = std::move(out);
  } else if (ta.rank() == 2 && tb.rank() == 2 && ta.rows() == tb.rows()) {
    const std::size_t r = ta.rows(), ca = ta.cols(), cb = tb.cols();
    Tensor out = Tensor::zeros({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = ta.at(i, j);
      for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = tb.at(i, j);
    }
    n.value = std::move(out);
  } else {
    throw ShapeError("concat: incompatible shapes " + shape_string(ta.shape()) + " vs " +
                     shape_string(tb.shape()));
  }
  return push(std::move(n), "concat");
}

Var Tape::slice(Var a, std::size_t first, std::size_t count) {
  const Tensor& ta = a.value();
  Node n;
  n.op = Op::kSlice;
  n.in0 = a.id();
  n.p0 = first;
  n.p1 = count;
  n.requires_grad = a.requires_grad();
  if (count == 0) throw ShapeError("slice: empty slice");
  if (ta.rank() == 1) {
    if (first + count > ta.size()) throw ShapeError("slice: range out of bounds");
    Tensor out = Tensor::zeros({count});
    for (std::size_t i = 0; i < count; ++i) out[i] = ta[first + i];
    n.value = std::move(out);
  } else if (ta.rank() == 2) {
    if (first + count > ta.cols()) throw ShapeError("slice: column range out of bounds");
    Tensor out = Tensor::zeros({ta.rows(), count});
    for (std::size_t i = 0; i < ta.rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) out.at(i, j) = ta.at(i, first + j);
    }
    n.value = std::move(out);
  } else {
    throw ShapeError("slice: rank-1 or rank-2 required");
  }
  return push(std::move(n), "slice");
}

Var Tape::row_broadcast_add(Var m, Var v) {
  const Tensor& tm = m.value();
  const Tensor& tv = v.value();
  if (tm.rank() != 2 || tv.rank() != 1 || tm.cols() != tv.size()) {
    throw ShapeError("row_broadcast_add: need [n,d] + [d], got " + shape_string(tm.shape()) +
                     " + " + shape_string(tv.shape()));
  }
  Node n;
  n.op = Op::kRowBroadcastAdd;
  n.in0 = m.id();
  n.in1 = v.id();
  n.requires_grad = m.requires_grad() || v.requires_grad();
  Tensor out = tm;
  for (std::size_t i = 0; i < tm.rows(); ++i) {
    for (std::size_t j = 0; j < tm.cols(); ++j) out.at(i, j) += tv[j];
  }
  n.value = std::move(out);
  return push(std::move(n), "row_broadcast_add");
}

void Tape::backward(Var output) {
  if (backward_done_) throw Error("Tape::backward: already run on this tape");
  if (output.value().size() != 1) {
    throw ShapeError("Tape::backward: output must be scalar, got " +
                     shape_string(output.value().shape()));
  }
  backward_done_ = true;

  grad_buffer(output.id())[0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (!n.grad_live || !n.requires_grad || n.op == Op::kLeaf) continue;
    const Tensor& gy = n.grad;

    switch (n.op) {
      case Op::kAdd: {
        if (nodes_[n.in0].requires_grad) {
          auto g = grad_buffer(n.in0).data();
          auto s = gy.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
        }
        if (nodes_[n.in1].requires_grad) {
          auto g = grad_buffer(n.in1).data();
          auto s = gy.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
        }
        break;
      }
      case Op::kSub: {
        if (nodes_[n.in0].requires_grad) {
          auto g = grad_buffer(n.in0).data();
          auto s = gy.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
        }
        if (nodes_[n.in1].requires_grad) {
          auto g = grad_buffer(n.in1).data();
          auto s = gy.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s[i];
        }
        break;
      }
      case Op::kMul: {
        if (nodes_[n.in0].requires_grad) {
          auto g = grad_buffer(n.in0).data();
          auto s = gy.data();
          auto other = nodes_[n.in1].value.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * other[i];
        }
        if (nodes_[n.in1].requires_grad) {
          auto g = grad_buffer(n.in1).data();
          auto s = gy.data();
          auto other = nodes_[n.in0].value.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * other[i];
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        if (nodes_[n.in0].requires_grad) {
          // dA += dY * B^T
          matmul_acc_nt(grad_buffer(n.in0).data(), gy.data(), b.data(), a.rows(), b.cols(),
                        b.rows());
        }
        if (nodes_[n.in1].requires_grad) {
          // dB += A^T * dY
          matmul_acc_tn(grad_buffer(n.in1).data(), a.data(), gy.data(), a.rows(), a.cols(),
                        b.cols());
        }
        break;
      }
      case Op::kTanh: {
        auto g = grad_buffer(n.in0).data();
        auto s = gy.data();
        auto y = n.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kRelu: {
        auto g = grad_buffer(n.in0).data();
        auto s = gy.data();
        auto x = nodes_[n.in0].value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += x[i] > 0.0 ? s[i] : 0.0;
        break;
      }
      case Op::kSquare: {
        auto g = grad_buffer(n.in0).data();
        auto s = gy.data();
        auto x = nodes_[n.in0].value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i] * 2.0 * x[i];
        break;
      }
      case Op::kSum: {
        auto g = grad_buffer(n.in0).data();
        const double s = gy[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
        break;
      }
      case Op::kMean: {
        auto g = grad_buffer(n.in0).data();
        const double s = gy[0] / static_cast<double>(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s;
        break;
      }
      case Op::kConcat: {
        const Tensor& a = nodes_[n.in0].value;
        const Tensor& b = nodes_[n.in1].value;
        if (a.rank() == 1) {
          if (nodes_[n.in0].requires_grad) {
            auto g = grad_buffer(n.in0).data();
            auto s = gy.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
          }
          if (nodes_[n.in1].requires_grad) {
            auto g = grad_buffer(n.in1).data();
            auto s = gy.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[a.size() + i];
          }
        } else {
          const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
          if (nodes_[n.in0].requires_grad) {
            Tensor& g = grad_buffer(n.in0);
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < ca; ++j) g.at(i, j) += gy.at(i, j);
          }
          if (nodes_[n.in1].requires_grad) {
            Tensor& g = grad_buffer(n.in1);
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < cb; ++j) g.at(i, j) += gy.at(i, ca + j);
          }
        }
        break;
      }
      case Op::kSlice: {
        const Tensor& a = nodes_[n.in0].value;
        Tensor& g = grad_buffer(n.in0);
        if (a.rank() == 1) {
          for (std::size_t i = 0; i < n.p1; ++i) g[n.p0 + i] += gy[i];
        } else {
          for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < n.p1; ++j) g.at(i, n.p0 + j) += gy.at(i, j);
        }
        break;
      }
      case Op::kRowBroadcastAdd: {
        const Tensor& m = nodes_[n.in0].value;
        if (nodes_[n.in0].requires_grad) {
          auto g = grad_buffer(n.in0).data();
          auto s = gy.data();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
        }
        if (nodes_[n.in1].requires_grad) {
          Tensor& g = grad_buffer(n.in1);
          for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) g[j] += gy.at(i, j);
        }
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
}

double finite_diff_check(const std::function<double(const ParamVector&)>& loss,
                         const std::function<ParamVector(const ParamVector&)>& gradient,
                         const ParamVector& at, double h) {
  if (!(h > 0.0)) throw Error("finite_diff_check: h must be positive");

  const double l0 = loss(at);
  const double l1 = loss(at);
  if (std::bit_cast<std::uint64_t>(l0) != std::bit_cast<std::uint64_t>(l1)) {
    throw Error("finite_diff_check: loss is non-deterministic (two evaluations differ)");
  }

  const ParamVector analytic = gradient(at);
  std::vector<double> flat = at.flatten();
  const std::vector<double> gflat = analytic.flatten();

  double max_rel = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    const double lp = loss(at.unflatten(flat));
    flat[i] = orig - h;
    const double lm = loss(at.unflatten(flat));
    flat[i] = orig;
    const double central = (lp - lm) / (2.0 * h);
    const double rel = std::abs(gflat[i] - central) / (std::abs(gflat[i]) + 1e-12);
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

}  // namespace sgrad
