#pragma once

#include <span>
#include <string>
#include <vector>

#include "sgrad/autodiff.hpp"
#include "sgrad/param_vector.hpp"
#include "sgrad/rng.hpp"
#include "sgrad/tensor.hpp"

namespace sgrad {

struct DenoiserSpec {
  std::size_t data_dim = 2;
  std::size_t hidden = 128;
  std::size_t time_dim = 8;  // sinusoidal, fixed (not trainable)
  std::size_t emb_dim = 16;

  std::size_t input_dim() const { return data_dim + time_dim + emb_dim; }
  bool operator==(const DenoiserSpec&) const = default;
};

// Trainable low-rank delta on one weight matrix: effective weight is
// base + a*b with a: [in, r], b: [r, out]. b starts at zero so a freshly
// attached adapter changes no output.
struct LowRankAdapter {
  std::string layer;  // "w1" | "w2" | "w3"
  Tensor a;           // [in, r]
  Tensor b;           // [r, out]
  std::size_t rank = 0;
};

// Concept-conditioned noise predictor: an MLP over
// [x_t || time_embed(t) || concept vec] with two tanh hidden layers and a
// linear head. Weight matrices are stored [in, out]. The head initializes to
// zero by default so the initial prediction is the zero tensor.
class Denoiser {
 public:
  enum class HeadInit { kZero, kRandom };
  enum class TrainMode { kFull, kAdapters };

  Denoiser() = default;
  static Denoiser init(const DenoiserSpec& spec, Rng& rng, HeadInit head = HeadInit::kZero);

  const DenoiserSpec& spec() const { return spec_; }
  const ParamVector& base() const { return base_; }
  void set_base(ParamVector p);
  const std::vector<LowRankAdapter>& adapters() const { return adapters_; }
  void set_adapters(std::vector<LowRankAdapter> a);
  TrainMode train_mode() const { return adapters_.empty() ? TrainMode::kFull : TrainMode::kAdapters; }

  // Inserts rank-r adapters on the named weight layers and freezes the base.
  // Throws on rank 0, unknown layer, or a duplicate adapter on a layer.
  void attach_adapters(std::size_t rank, std::span<const std::string> layers, Rng& rng);

  // Number of trainable scalars: sum of r*(in+out) in adapter mode, else the
  // base parameter count.
  std::size_t trainable_count() const;

  // Snapshot of the trainable parameters (base params, or adapter factors in
  // adapter mode). Layout order is fixed and shared with gradients.
  ParamVector trainable() const;
  void set_trainable(const ParamVector& p);

  // Builds the prediction subgraph for a batch. `emb_rows` is [n, emb_dim].
  // Parameter leaves are created on the tape; when `trainable_vars` is given,
  // the trainable ones are created with requires_grad and reported in
  // trainable() layout order. With trainable_vars == nullptr all parameters
  // are frozen constants (attack and sampling paths).
  Var forward_graph(Tape& tape, Var x_t, std::span<const int> timesteps, Var emb_rows,
                    std::vector<Var>* trainable_vars = nullptr) const;

  // [n, emb_dim] from a single conditioning vector (row-broadcast).
  Var emb_rows_from_vec(Tape& tape, Var emb_vec, std::size_t n) const;

  // [n, emb_dim] selecting table rows per sample via a constant one-hot
  // matmul, so gradients reach the table matrix.
  Var emb_rows_from_table(Tape& tape, Var table_matrix, std::span<const std::size_t> rows) const;

  // Plain-tensor prediction on a scratch tape (same graph machinery, no
  // gradients). Safe to call concurrently on a frozen model.
  Tensor predict(const Tensor& x_t, std::span<const int> timesteps, const Tensor& emb_vec) const;

  // Sinusoidal time features, [n, time_dim].
  Tensor time_features(std::span<const int> timesteps) const;

 private:
  DenoiserSpec spec_;
  ParamVector base_;  // w1 [in,h], b1 [h], w2 [h,h], b2 [h], w3 [h,d], b3 [d]
  std::vector<LowRankAdapter> adapters_;
};

}  // namespace sgrad
