#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgrad/autodiff.hpp"
#include "sgrad/error.hpp"
#include "sgrad/rng.hpp"
#include "sgrad/schedule.hpp"
#include "sgrad/tensor.hpp"

namespace sgrad {

// One training minibatch: clean samples, their concept labels, and the shared
// (t, eps) draws. Noise comes from a seeded generator so runs replay exactly.
struct Batch {
  Tensor x0;                             // [n, d]
  std::vector<std::string> concept_ids;  // n entries
  std::vector<int> timesteps;            // n entries in [1, T]
  Tensor noise;                          // [n, d], i.i.d. standard normal

  std::size_t size() const { return x0.rank() == 2 ? x0.rows() : 0; }
  void validate(const NoiseSchedule& sched) const;
};

// Forward noising: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

// Row-wise q_sample with a per-row timestep.
Tensor q_sample_batch(const Tensor& x0, std::span<const int> timesteps, const Tensor& eps,
                      const NoiseSchedule& sched);

// Denoising-score-matching loss: mean over batch and coordinates of
// (eps - eps_hat)^2. `den` builds the prediction subgraph:
//   den(tape, x_t, timesteps) -> Var of shape [n, d]
// so gradients flow to whatever leaves the builder wired in (model
// parameters, conditioning embedding, or nothing for oracle stubs).
template <typename DenFn>
Var dsm_loss(Tape& tape, DenFn&& den, const Batch& batch, const NoiseSchedule& sched) {
  if (batch.size() == 0) throw Error("dsm_loss: empty batch");
  batch.validate(sched);
  Tensor xt = q_sample_batch(batch.x0, batch.timesteps, batch.noise, sched);
  Var pred = den(tape, xt, std::span<const int>(batch.timesteps));
  if (!pred.value().same_shape(batch.noise)) {
    throw ShapeError("dsm_loss: prediction shape " + shape_string(pred.value().shape()) +
                     " does not match noise shape " + shape_string(batch.noise.shape()));
  }
  Var eps = tape.leaf(batch.noise, /*requires_grad=*/false);
  return tape.mean(tape.square(tape.sub(eps, pred)));
}

// Ancestral reverse chain:
//   x_{t-1} = (x_t - (beta_t / sqrt(1 - abar_t)) * eps_hat) / sqrt(alpha_t)
//             + sigma_t * z,   sigma_t = sqrt(beta_t), z = 0 at t = 1.
// `pred` evaluates the frozen denoiser: pred(x_t, timesteps) -> Tensor [n,d].
// Deterministic per rng state; n must be >= 1.
template <typename PredFn>
Tensor sample_chain(PredFn&& pred, const NoiseSchedule& sched, std::size_t n, std::size_t d,
                    Rng& rng) {
  if (n < 1) throw Error("sample_chain: n must be >= 1");
  Tensor x = Tensor::randn({n, d}, rng);
  std::vector<int> ts(n);
  for (int t = static_cast<int>(sched.T); t >= 1; --t) {
    for (auto& v : ts) v = t;
    Tensor eps_hat = pred(x, std::span<const int>(ts));
    if (!eps_hat.same_shape(x)) {
      throw ShapeError("sample_chain: prediction shape mismatch");
    }
    const double beta = sched.beta_at(t);
    const double coef = beta / std::sqrt(1.0 - sched.alpha_bar_at(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
    auto xd = x.data();
    auto ed = eps_hat.data();
    if (t > 1) {
      const double sigma = std::sqrt(beta);
      for (std::size_t i = 0; i < xd.size(); ++i) {
        xd[i] = inv_sqrt_alpha * (xd[i] - coef * ed[i]) + sigma * rng.normal();
      }
    } else {
      for (std::size_t i = 0; i < xd.size(); ++i) {
        xd[i] = inv_sqrt_alpha * (xd[i] - coef * ed[i]);
      }
    }
    if (!x.all_finite()) throw NonFiniteError("sample_chain: non-finite state at t=" +
                                              std::to_string(t));
  }
  return x;
}

}  // namespace sgrad
