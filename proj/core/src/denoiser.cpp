#include "sgrad/denoiser.hpp"

#include <cmath>
#include <utility>

#include "sgrad/error.hpp"

namespace sgrad {
namespace {

Tensor glorot(std::size_t in, std::size_t out, Rng& rng) {
  return Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

struct LayerDims {
  std::size_t in;
  std::size_t out;
};

LayerDims layer_dims(const DenoiserSpec& spec, const std::string& layer) {
  if (layer == "w1") return {spec.input_dim(), spec.hidden};
  if (layer == "w2") return {spec.hidden, spec.hidden};
  if (layer == "w3") return {spec.hidden, spec.data_dim};
  throw Error("Denoiser: unknown layer '" + layer + "'");
}

}  // namespace

Denoiser Denoiser::init(const DenoiserSpec& spec, Rng& rng, HeadInit head) {
  Denoiser d;
  d.spec_ = spec;
  d.base_.append("w1", glorot(spec.input_dim(), spec.hidden, rng));
  d.base_.append("b1", Tensor::zeros({spec.hidden}));
  d.base_.append("w2", glorot(spec.hidden, spec.hidden, rng));
  d.base_.append("b2", Tensor::zeros({spec.hidden}));
  if (head == HeadInit::kZero) {
    d.base_.append("w3", Tensor::zeros({spec.hidden, spec.data_dim}));
  } else {
    d.base_.append("w3", glorot(spec.hidden, spec.data_dim, rng));
  }
  d.base_.append("b3", Tensor::zeros({spec.data_dim}));
  return d;
}

void Denoiser::set_base(ParamVector p) {
  if (!p.same_layout(base_)) throw ShapeError("Denoiser::set_base: layout mismatch");
  base_ = std::move(p);
}

void Denoiser::set_adapters(std::vector<LowRankAdapter> a) { adapters_ = std::move(a); }

void Denoiser::attach_adapters(std::size_t rank, std::span<const std::string> layers, Rng& rng) {
  if (rank < 1) throw Error("attach_adapters: rank must be >= 1");
  if (layers.empty()) throw Error("attach_adapters: no layers given");
  for (const auto& layer : layers) {
    const LayerDims dims = layer_dims(spec_, layer);
    for (const auto& existing : adapters_) {
      if (existing.layer == layer) {
        throw Error("attach_adapters: duplicate adapter on layer '" + layer + "'");
      }
    }
    LowRankAdapter ad;
    ad.layer = layer;
    ad.rank = rank;
    ad.a = Tensor::randn({dims.in, rank}, rng, 1.0 / std::sqrt(static_cast<double>(dims.in)));
    ad.b = Tensor::zeros({rank, dims.out});  // zero delta at attach time
    adapters_.push_back(std::move(ad));
  }
}

std::size_t Denoiser::trainable_count() const {
  if (adapters_.empty()) return base_.total_len();
  std::size_t n = 0;
  for (const auto& ad : adapters_) n += ad.a.size() + ad.b.size();
  return n;
}

ParamVector Denoiser::trainable() const {
  ParamVector p;
  if (adapters_.empty()) {
    for (const auto& s : base_.segments()) p.append(s.name, s.tensor);
  } else {
    for (const auto& ad : adapters_) {
      p.append(ad.layer + ".adapter_a", ad.a);
      p.append(ad.layer + ".adapter_b", ad.b);
    }
  }
  return p;
}

void Denoiser::set_trainable(const ParamVector& p) {
  if (!p.same_layout(trainable())) throw ShapeError("Denoiser::set_trainable: layout mismatch");
  if (adapters_.empty()) {
    base_ = p;
  } else {
    for (auto& ad : adapters_) {
      ad.a = p.tensor(ad.layer + ".adapter_a");
      ad.b = p.tensor(ad.layer + ".adapter_b");
    }
  }
}

Tensor Denoiser::time_features(std::span<const int> timesteps) const {
  const std::size_t half = spec_.time_dim / 2;
  Tensor out = Tensor::zeros({timesteps.size(), spec_.time_dim});
  for (std::size_t i = 0; i < timesteps.size(); ++i) {
    const double t = static_cast<double>(timesteps[i]);
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
      out.at(i, 2 * k) = std::sin(t * freq);
      out.at(i, 2 * k + 1) = std::cos(t * freq);
    }
  }
  return out;
}

Var Denoiser::emb_rows_from_vec(Tape& tape, Var emb_vec, std::size_t n) const {
  if (emb_vec.value().rank() != 1 || emb_vec.value().size() != spec_.emb_dim) {
    throw ShapeError("emb_rows_from_vec: conditioning vector must be [emb_dim]");
  }
  Var zeros = tape.leaf(Tensor::zeros({n, spec_.emb_dim}), false);
  return tape.row_broadcast_add(zeros, emb_vec);
}

Var Denoiser::emb_rows_from_table(Tape& tape, Var table_matrix,
                                  std::span<const std::size_t> rows) const {
  const Tensor& m = table_matrix.value();
  if (m.rank() != 2 || m.cols() != spec_.emb_dim) {
    throw ShapeError("emb_rows_from_table: table must be [K, emb_dim]");
  }
  Tensor onehot = Tensor::zeros({rows.size(), m.rows()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw ShapeError("emb_rows_from_table: row index out of range");
    onehot.at(i, rows[i]) = 1.0;
  }
  Var sel = tape.leaf(std::move(onehot), false);
  return tape.matmul(sel, table_matrix);
}

Var Denoiser::forward_graph(Tape& tape, Var x_t, std::span<const int> timesteps, Var emb_rows,
                            std::vector<Var>* trainable_vars) const {
  const Tensor& xt = x_t.value();
  if (xt.rank() != 2 || xt.cols() != spec_.data_dim) {
    throw ShapeError("Denoiser: x_t must be [n, data_dim], got " + shape_string(xt.shape()));
  }
  if (timesteps.size() != xt.rows()) throw ShapeError("Denoiser: one timestep per row required");
  if (emb_rows.value().rank() != 2 || emb_rows.value().rows() != xt.rows() ||
      emb_rows.value().cols() != spec_.emb_dim) {
    throw ShapeError("Denoiser: emb_rows must be [n, emb_dim]");
  }

  const bool train = trainable_vars != nullptr;
  if (train) trainable_vars->clear();

  Var w1, b1, w2, b2, w3, b3;
  if (adapters_.empty()) {
    auto param = [&](const char* name) {
      Var v = tape.leaf(base_.tensor(name), train);
      if (train) trainable_vars->push_back(v);
      return v;
    };
    w1 = param("w1");
    b1 = param("b1");
    w2 = param("w2");
    b2 = param("b2");
    w3 = param("w3");
    b3 = param("b3");
  } else {
    // Base frozen; factor leaves follow attach order so trainable_vars lines
    // up with the trainable() layout.
    std::vector<std::pair<Var, Var>> factors;
    for (const auto& ad : adapters_) {
      Var a = tape.leaf(ad.a, train);
      Var b = tape.leaf(ad.b, train);
      if (train) {
        trainable_vars->push_back(a);
        trainable_vars->push_back(b);
      }
      factors.emplace_back(a, b);
    }
    auto adapted = [&](const char* name) {
      Var w = tape.leaf(base_.tensor(name), false);
      for (std::size_t i = 0; i < adapters_.size(); ++i) {
        if (adapters_[i].layer == name) {
          w = tape.add(w, tape.matmul(factors[i].first, factors[i].second));
        }
      }
      return w;
    };
    w1 = adapted("w1");
    b1 = tape.leaf(base_.tensor("b1"), false);
    w2 = adapted("w2");
    b2 = tape.leaf(base_.tensor("b2"), false);
    w3 = adapted("w3");
    b3 = tape.leaf(base_.tensor("b3"), false);
  }

  Var temb = tape.leaf(time_features(timesteps), false);
  Var input = tape.concat(tape.concat(x_t, temb), emb_rows);

  Var h1 = tape.tanh(tape.row_broadcast_add(tape.matmul(input, w1), b1));
  Var h2 = tape.tanh(tape.row_broadcast_add(tape.matmul(h1, w2), b2));
  return tape.row_broadcast_add(tape.matmul(h2, w3), b3);
}

Tensor Denoiser::predict(const Tensor& x_t, std::span<const int> timesteps,
                         const Tensor& emb_vec) const {
  Tape tape;
  Var x = tape.leaf(x_t, false);
  Var emb = tape.leaf(emb_vec, false);
  Var rows = emb_rows_from_vec(tape, emb, x_t.rows());
  return forward_graph(tape, x, timesteps, rows).value();
}

}  // namespace sgrad
