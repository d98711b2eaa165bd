#pragma once

#include <mutex>
#include <vector>

#include "sgrad/denoiser.hpp"
#include "sgrad/diffusion.hpp"
#include "sgrad/param_vector.hpp"

namespace sgrad {

// Projection hyperparameters. lambda = 1 gives exact orthogonal excision (the
// setting the guarantees hold under); lambda = 0.1 is the stability default.
// The update is plain gradient descent on purpose: momentum or adaptive state
// would re-inject forbidden components from past steps and void the
// per-step orthogonality and capacity guarantees.
struct ProjectionConfig {
  double lambda = 0.1;
  double epsilon = 1e-8;
  double eta = 0.01;  // learning rate
  bool rescale_enabled = true;

  void validate() const;
};

// Per-update evidence ledger: inner products, norms, and the capacity of the
// forbidden direction before/after the update.
struct ProjectionReport {
  int step = 0;
  double dot_main_feat = 0.0;
  double dot_proj_feat = 0.0;
  double norm_main = 0.0;
  double norm_perp = 0.0;
  double norm_proj = 0.0;
  double capacity_before = 0.0;
  double capacity_after = 0.0;
  double lambda_used = 0.0;
  double loss_main = 0.0;
  double loss_feat = 0.0;
};

// Thread-safe append-only sink for step reports.
class ReportSink {
 public:
  void append(const ProjectionReport& r);
  std::vector<ProjectionReport> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<ProjectionReport> reports_;
};

// CSV schema shared by the sink serialization and the run reports.
extern const char* const kProjectionCsvHeader;
std::string projection_csv_row(const ProjectionReport& r);

// DSM loss value and gradient over the model's trainable layout for one batch
// under a fixed conditioning vector. Both training modes and both projection
// passes run through here, so identical inputs give identical bits.
double dsm_loss_grad(const Denoiser& model, const Batch& batch, const Tensor& emb,
                     const NoiseSchedule& sched, ParamVector* grad_out);

struct PairGrads {
  ParamVector g_main;
  ParamVector g_feat;
  double loss_main = 0.0;
  double loss_feat = 0.0;
};

// Two gradients over the identical trainable layout, sharing the batch's
// (x0, eps, t) draws so the prompt is the only difference between passes.
PairGrads compute_pair_grads(const Denoiser& model, const Batch& batch, const Tensor& emb_main,
                             const Tensor& emb_feat, const NoiseSchedule& sched);

// g_perp = g_main - lambda * (<g_main, g_feat> / (||g_feat||^2 + eps)) * g_feat.
// A zero coefficient (lambda = 0, orthogonal gradients, or g_feat = 0 with
// eps > 0; for eps = 0 the zero-direction projector is the identity) returns
// g_main unchanged, bit-for-bit.
ParamVector project(const ParamVector& g_main, const ParamVector& g_feat,
                    const ProjectionConfig& cfg);

// g_proj = (||g_main|| / ||g_perp||) * g_perp. Throws DegenerateGradient when
// ||g_perp|| <= 1e-12 * ||g_main|| (parallel-gradient collapse); the caller
// skips the step and logs it.
ParamVector rescale(const ParamVector& g_perp, const ParamVector& g_main);

// theta' = theta - eta * g.
ParamVector apply_update(const ParamVector& theta, const ParamVector& g, double eta);

// Memorization capacity against the forbidden direction:
//   M_f(theta) = (<theta, g_feat> / ||g_feat||)^2,
// the squared norm of theta's projection onto span{g_feat}. Scale-invariant
// in g_feat; throws on a zero direction.
double capacity(const ParamVector& theta, const ParamVector& g_feat);

// One constrained update: pair grads -> project -> rescale -> apply, with the
// capacity measured against this step's own g_feat before and after. Mutates
// the model's trainable parameters. Propagates DegenerateGradient without
// touching the model.
ProjectionReport projected_step(Denoiser& model, const Batch& batch, const Tensor& emb_main,
                                const Tensor& emb_feat, const NoiseSchedule& sched,
                                const ProjectionConfig& cfg, int step);

}  // namespace sgrad
