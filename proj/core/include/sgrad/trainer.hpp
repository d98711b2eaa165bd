#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sgrad/checkpoint.hpp"
#include "sgrad/config.hpp"
#include "sgrad/dataset.hpp"
#include "sgrad/diffusion.hpp"
#include "sgrad/projection.hpp"

namespace sgrad {

enum class FinetuneMode { kNaive, kProjected };

// Per-stage training record: the loss curve, the projection ledger (projected
// mode), the frozen-direction capacity diagnostic, and skipped degenerate
// steps.
struct StageResult {
  std::vector<double> loss_curve;
  std::vector<ProjectionReport> reports;
  std::vector<double> capacity_frozen;  // vs the g_feat captured at stage start
  std::size_t degenerate_skips = 0;
};

// Draws a batch (indices with replacement, uniform timesteps in [1,T], unit
// normal noise) in a fixed order so naive and projected runs replay the same
// stream.
Batch draw_batch(const Dataset& data, std::size_t batch_size, const NoiseSchedule& sched,
                 Rng& rng);

// Test hook: observes every batch drawn by a training stage.
using BatchObserver = std::function<void(const Batch&)>;

// Stage 1: plain DSM pretraining on the general split. The embedding table
// trains along with the model here and freezes afterwards. Checkpoint tagged
// "pretrained". Aborts with DivergenceError when the loss exceeds 10x the
// initial loss for 100 consecutive steps.
Checkpoint run_pretrain(const ExperimentConfig& cfg, StageResult* result = nullptr,
                        const BatchObserver& observer = nullptr);

// Stage 2: fine-tuning on the sensitive split from a pretrained checkpoint.
// Naive mode descends g_main only; projected mode runs the constrained update
// with the (p_main, p_feat) pair. Both modes consume identical RNG streams,
// so a lambda=0 projected run is bit-identical to the naive run.
Checkpoint run_finetune(const ExperimentConfig& cfg, const Checkpoint& pretrained,
                        FinetuneMode mode, StageResult* result = nullptr,
                        const BatchObserver& observer = nullptr);

// Samples n points conditioned on one concept from a frozen checkpoint.
Tensor sample_from_checkpoint(const Checkpoint& cp, const std::string& concept_id, std::size_t n,
                              std::uint64_t seed);

}  // namespace sgrad
