#pragma once

#include <cstdint>
#include <vector>

#include "sgrad/denoiser.hpp"
#include "sgrad/metrics.hpp"
#include "sgrad/schedule.hpp"
#include "sgrad/tensor.hpp"

namespace sgrad {

// Targeted extraction attack: optimize a conditioning embedding against a
// frozen model to coerce reproduction of a protected sample. The objective is
// the DSM loss of the target under the candidate embedding, averaged over a
// fixed set of (t, eps) draws — a differentiable surrogate for a
// sampling-based image distance; the copy score of samples generated under
// the final embedding is reported post hoc.
struct AttackConfig {
  Tensor target;  // [d] protected sample
  int steps = 500;
  double lr = 0.05;
  enum class Init { kRandom, kMainConcept } init = Init::kRandom;
  std::uint64_t seed = 0;
  int objective_draws = 64;     // fixed (t, eps) pairs defining the objective
  std::size_t score_samples = 256;  // generations for the post-hoc copy score

  void validate() const;
};

struct AttackResult {
  Tensor embedding;  // [emb_dim]
  std::vector<double> loss_curve;  // length == steps
  double final_copy_score = 0.0;
  double init_loss = 0.0;
  int lr_halvings = 0;
};

// Gradient descent on the embedding only; model parameters stay frozen.
// Step-size control: halve lr on a loss increase, at most 3 halvings per
// step; if the step still increases the loss the embedding stays put, so the
// loss curve is nonincreasing. Deterministic per seed. `main_emb` seeds the
// kMainConcept init and must be non-null for it.
AttackResult optimize_adversarial_embedding(const Denoiser& model, const NoiseSchedule& sched,
                                            const AttackConfig& cfg,
                                            const ProtectedSet& protected_set,
                                            const Tensor* main_emb = nullptr);

struct AttackComparison {
  AttackResult naive;
  AttackResult projected;
  double score_ratio = 0.0;  // projected / naive
};

// Runs the identical attack (same targets and seeds) against both fine-tuned
// variants. Throws on mismatched architectures.
AttackComparison attack_ab_compare(const Denoiser& model_naive, const Denoiser& model_projected,
                                   const NoiseSchedule& sched, const AttackConfig& cfg,
                                   const ProtectedSet& protected_set,
                                   const Tensor* main_emb = nullptr);

}  // namespace sgrad
