#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "sgrad/autodiff.hpp"
#include "sgrad/error.hpp"
#include "sgrad/param_vector.hpp"
#include "sgrad/rng.hpp"
#include "sgrad/tensor.hpp"

using namespace sgrad;

namespace {

bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("tensor shape and data invariants") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK(shape_product(t.shape()) == t.size());

  CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor::from_data({0}, {}), ShapeError);

  Tensor s = Tensor::scalar(4.5);
  CHECK(s.rank() == 0);
  CHECK(s.item() == 4.5);

  CHECK(Tensor::from_data({2}, {1.0, std::nan("")}).all_finite() == false);
}

TEST_CASE("param vector flatten/unflatten round-trips bit-exactly") {
  Rng rng(7);
  ParamVector p;
  p.append("w", Tensor::randn({4, 3}, rng));
  p.append("b", Tensor::randn({3}, rng));
  p.append("scalar", Tensor::randn({1}, rng, 1e-300));  // subnormal-adjacent values too

  const std::vector<double> flat = p.flatten();
  CHECK(flat.size() == p.total_len());
  ParamVector q = p.unflatten(flat);
  REQUIRE(q.same_layout(p));
  for (std::size_t i = 0; i < p.segment_count(); ++i) {
    CHECK(same_bits(p.segment(i).tensor.data(), q.segment(i).tensor.data()));
  }

  CHECK_THROWS_AS(p.append("w", Tensor::zeros({1})), Error);
  CHECK_THROWS_AS(p.unflatten(std::vector<double>(3)), ShapeError);
}

TEST_CASE("param vector dot is a positive-definite inner product") {
  Rng rng(11);
  ParamVector g;
  g.append("a", Tensor::randn({16}, rng));
  g.append("b", Tensor::randn({4, 4}, rng));

  const double d = dot(g, g);
  CHECK(d >= 0.0);
  CHECK(norm(g) == doctest::Approx(std::sqrt(d)).epsilon(1e-15));

  ParamVector other;
  other.append("a", Tensor::zeros({16}));
  CHECK_THROWS_AS(dot(g, other), ShapeError);
}

TEST_CASE("forward: identity and elementwise square") {
  Tape tape;
  Var x = tape.leaf(Tensor::from_data({3}, {1, 2, 3}));
  CHECK(same_bits(x.value().data(), std::vector<double>{1, 2, 3}));

  Tape tape2;
  Var y = tape2.leaf(Tensor::from_data({1}, {2.0}));
  Var sq = tape2.mul(y, y);
  CHECK(sq.value()[0] == 4.0);
}

TEST_CASE("forward: two-layer tanh network matches a hand-evaluated chain") {
  // Independent scalar re-evaluation outside the graph engine.
  Rng rng(0);
  const std::size_t in = 2, hidden = 4, out = 2;
  Tensor w1 = Tensor::randn({in, hidden}, rng);
  Tensor b1 = Tensor::randn({hidden}, rng);
  Tensor w2 = Tensor::randn({hidden, out}, rng);
  Tensor b2 = Tensor::randn({out}, rng);
  Tensor x = Tensor::zeros({1, in});  // x = (0, 0)

  Tape tape;
  Var vx = tape.leaf(x);
  Var h = tape.tanh(tape.row_broadcast_add(tape.matmul(vx, tape.leaf(w1)), tape.leaf(b1)));
  Var o = tape.row_broadcast_add(tape.matmul(h, tape.leaf(w2)), tape.leaf(b2));

  std::vector<double> hh(hidden), oo(out);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = b1[j];
    for (std::size_t i = 0; i < in; ++i) acc += x.at(0, i) * w1.at(i, j);
    hh[j] = std::tanh(acc);
  }
  for (std::size_t j = 0; j < out; ++j) {
    double acc = b2[j];
    for (std::size_t i = 0; i < hidden; ++i) acc += hh[i] * w2.at(i, j);
    oo[j] = acc;
  }
  for (std::size_t j = 0; j < out; ++j) {
    CHECK(o.value().at(0, j) == doctest::Approx(oo[j]).epsilon(1e-14));
  }
}

TEST_CASE("backward: analytic gradients") {
  SUBCASE("f(t) = t^2 at t = 3 gives 6") {
    Tape tape;
    Var t = tape.leaf(Tensor::scalar(3.0), true);
    Var loss = tape.sum(tape.square(t));
    tape.backward(loss);
    CHECK(t.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("f(t) = sum(t) gives all-ones") {
    Tape tape;
    Var t = tape.leaf(Tensor::from_data({4}, {1, 2, 3, 4}), true);
    Var loss = tape.sum(t);
    tape.backward(loss);
    const Tensor g = t.grad();
    for (double v : g.data()) CHECK(v == 1.0);
  }
  SUBCASE("non-scalar output rejected") {
    Tape tape;
    Var t = tape.leaf(Tensor::from_data({2}, {1, 2}), true);
    CHECK_THROWS_AS(tape.backward(t), ShapeError);
  }
  SUBCASE("second backward rejected") {
    Tape tape;
    Var t = tape.leaf(Tensor::scalar(1.0), true);
    Var loss = tape.sum(t);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), Error);
  }
}

TEST_CASE("non-finite values surface at the op boundary") {
  Tape tape;
  CHECK_THROWS_AS(tape.leaf(Tensor::from_data({1}, {std::nan("")})), NonFiniteError);
  Var big = tape.leaf(Tensor::from_data({1}, {1e200}));
  CHECK_THROWS_AS(tape.square(big), NonFiniteError);
}

namespace {

// Rebuilds the op graph from flat inputs; used to run every primitive through
// the central-difference oracle.
struct OpCheck {
  const char* name;
  std::vector<std::vector<std::size_t>> input_shapes;
  std::function<Var(Tape&, std::vector<Var>&)> build;
};

double op_max_rel_error(const OpCheck& op, Rng& rng) {
  ParamVector inputs;
  for (std::size_t i = 0; i < op.input_shapes.size(); ++i) {
    Tensor t = Tensor::randn(op.input_shapes[i], rng);
    // Keep relu inputs away from the kink.
    for (double& v : t.data()) {
      if (std::abs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
    }
    inputs.append("in" + std::to_string(i), t);
  }
  auto loss = [&](const ParamVector& pv) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& seg : pv.segments()) vars.push_back(tape.leaf(seg.tensor, true));
    return op.build(tape, vars).value().item();
  };
  auto grad = [&](const ParamVector& pv) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& seg : pv.segments()) vars.push_back(tape.leaf(seg.tensor, true));
    Var l = op.build(tape, vars);
    tape.backward(l);
    ParamVector g;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      g.append(pv.segment(i).name, vars[i].grad());
    }
    return g;
  };
  return finite_diff_check(loss, grad, inputs, 1e-6);
}

}  // namespace

TEST_CASE("every primitive op matches central differences") {
  std::vector<OpCheck> ops = {
      {"add", {{10}, {10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.add(v[0], v[1])); }},
      {"sub", {{10}, {10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.sub(v[0], v[1]))); }},
      {"mul", {{10}, {10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.mul(v[0], v[1])); }},
      {"matmul", {{2, 5}, {5, 3}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.matmul(v[0], v[1])); }},
      {"tanh", {{10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.tanh(v[0])); }},
      {"relu", {{10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.relu(v[0]))); }},
      {"square", {{10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(v[0])); }},
      {"sum", {{10}}, [](Tape& t, std::vector<Var>& v) { return t.square(t.sum(v[0])); }},
      {"mean", {{10}}, [](Tape& t, std::vector<Var>& v) { return t.square(t.mean(v[0])); }},
      {"concat1d", {{4}, {6}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.concat(v[0], v[1]))); }},
      {"concat2d", {{2, 2}, {2, 3}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.concat(v[0], v[1]))); }},
      {"slice1d", {{10}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.slice(v[0], 2, 5))); }},
      {"slice2d", {{2, 5}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.slice(v[0], 1, 3))); }},
      {"row_broadcast_add", {{3, 4}, {4}}, [](Tape& t, std::vector<Var>& v) { return t.sum(t.square(t.row_broadcast_add(v[0], v[1]))); }},
  };

  // >= 100 trials across the primitive set, fixed seeds.
  for (const auto& op : ops) {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 12; ++trial) {
      Rng rng = Rng::substream(42, trial * 131 + static_cast<std::uint64_t>(op.name[0]));
      worst = std::max(worst, op_max_rel_error(op, rng));
    }
    INFO("op = ", op.name, ", worst rel error = ", worst);
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("op shape mismatches throw") {
  Tape tape;
  Var a = tape.leaf(Tensor::zeros({2, 3}));
  Var b = tape.leaf(Tensor::zeros({3, 2}));
  CHECK_THROWS_AS(tape.add(a, b), ShapeError);
  CHECK_THROWS_AS(tape.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(tape.concat(a, tape.leaf(Tensor::zeros({3}))), ShapeError);
  CHECK_THROWS_AS(tape.slice(a, 2, 4), ShapeError);
  CHECK_THROWS_AS(tape.row_broadcast_add(a, tape.leaf(Tensor::zeros({2}))), ShapeError);
}

TEST_CASE("finite_diff_check on analytic losses") {
  Rng rng(3);
  ParamVector p;
  p.append("x", Tensor::randn({6}, rng));

  SUBCASE("quadratic loss is exact up to roundoff") {
    auto loss = [](const ParamVector& pv) {
      double acc = 0.0;
      for (double v : pv.segment(0).tensor.data()) acc += v * v;
      return acc;
    };
    auto grad = [](const ParamVector& pv) {
      ParamVector g;
      Tensor t = pv.segment(0).tensor;
      for (double& v : t.data()) v *= 2.0;
      g.append("x", std::move(t));
      return g;
    };
    CHECK(finite_diff_check(loss, grad, p, 1e-5) <= 1e-7);
  }

  SUBCASE("linear loss") {
    auto loss = [](const ParamVector& pv) {
      double acc = 0.0;
      for (double v : pv.segment(0).tensor.data()) acc += 3.0 * v;
      return acc;
    };
    auto grad = [](const ParamVector& pv) {
      ParamVector g;
      g.append("x", Tensor::full(pv.segment(0).tensor.shape(), 3.0));
      return g;
    };
    CHECK(finite_diff_check(loss, grad, p, 1e-5) <= 1e-10);
  }

  SUBCASE("non-deterministic loss is detected") {
    int calls = 0;
    auto loss = [&calls](const ParamVector&) { return static_cast<double>(calls++); };
    auto grad = [](const ParamVector& pv) { return pv; };
    CHECK_THROWS_AS(finite_diff_check(loss, grad, p, 1e-5), Error);
  }

  SUBCASE("h must be positive") {
    auto loss = [](const ParamVector&) { return 0.0; };
    auto grad = [](const ParamVector& pv) { return pv; };
    CHECK_THROWS_AS(finite_diff_check(loss, grad, p, 0.0), Error);
  }
}

TEST_CASE("backward accumulation is deterministic") {
  // Same graph twice gives bit-identical gradients.
  auto run = [] {
    Rng rng(5);
    Tape tape;
    Var a = tape.leaf(Tensor::randn({8, 8}, rng), true);
    Var b = tape.leaf(Tensor::randn({8, 8}, rng), true);
    Var loss = tape.mean(tape.square(tape.matmul(tape.tanh(a), b)));
    tape.backward(loss);
    return std::make_pair(a.grad(), b.grad());
  };
  auto [ga1, gb1] = run();
  auto [ga2, gb2] = run();
  CHECK(same_bits(ga1.data(), ga2.data()));
  CHECK(same_bits(gb1.data(), gb2.data()));
}
