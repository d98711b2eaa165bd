#include "sgrad/projection.hpp"

#include <cmath>
#include <cstdio>

#include "sgrad/error.hpp"

namespace sgrad {

void ProjectionConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("ProjectionConfig: lambda must be in [0,1]");
  if (!(epsilon >= 0.0)) throw Error("ProjectionConfig: epsilon must be >= 0");
  if (!(eta > 0.0)) throw Error("ProjectionConfig: eta must be > 0");
}

void ReportSink::append(const ProjectionReport& r) {
  std::lock_guard<std::mutex> lock(mu_);
  reports_.push_back(r);
}

std::vector<ProjectionReport> ReportSink::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return reports_;
}

std::size_t ReportSink::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return reports_.size();
}

const char* const kProjectionCsvHeader =
    "step,dot_main_feat,dot_proj_feat,norm_main,norm_perp,norm_proj,"
    "capacity_before,capacity_after,lambda_used";

std::string projection_csv_row(const ProjectionReport& r) {
  char buf[400];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step,
                r.dot_main_feat, r.dot_proj_feat, r.norm_main, r.norm_perp, r.norm_proj,
                r.capacity_before, r.capacity_after, r.lambda_used);
  return buf;
}

double dsm_loss_grad(const Denoiser& model, const Batch& batch, const Tensor& emb,
                     const NoiseSchedule& sched, ParamVector* grad_out) {
  Tape tape;
  std::vector<Var> trainable_vars;
  Var emb_var = tape.leaf(emb, false);
  Var loss = dsm_loss(
      tape,
      [&](Tape& t, const Tensor& xt, std::span<const int> ts) {
        Var x = t.leaf(xt, false);
        Var rows = model.emb_rows_from_vec(t, emb_var, xt.rows());
        return model.forward_graph(t, x, ts, rows, &trainable_vars);
      },
      batch, sched);
  if (grad_out != nullptr) {
    tape.backward(loss);
    ParamVector layout = model.trainable();
    ParamVector g;
    for (std::size_t i = 0; i < layout.segment_count(); ++i) {
      g.append(layout.segment(i).name, trainable_vars[i].grad());
    }
    *grad_out = std::move(g);
  }
  return loss.value().item();
}

PairGrads compute_pair_grads(const Denoiser& model, const Batch& batch, const Tensor& emb_main,
                             const Tensor& emb_feat, const NoiseSchedule& sched) {
  PairGrads out;
  out.loss_main = dsm_loss_grad(model, batch, emb_main, sched, &out.g_main);
  out.loss_feat = dsm_loss_grad(model, batch, emb_feat, sched, &out.g_feat);
  return out;
}

ParamVector project(const ParamVector& g_main, const ParamVector& g_feat,
                    const ProjectionConfig& cfg) {
  cfg.validate();
  if (!g_main.same_layout(g_feat)) throw ShapeError("project: gradient layouts differ");

  const double denom = dot(g_feat, g_feat) + cfg.epsilon;
  // span{0} projects to nothing: identity in the limit, and the short circuit
  // keeps the zero-coefficient cases bit-exact.
  if (denom == 0.0) return g_main;
  const double coef = cfg.lambda * (dot(g_main, g_feat) / denom);
  if (coef == 0.0) return g_main;
  return add_scaled(g_main, -coef, g_feat);
}

ParamVector rescale(const ParamVector& g_perp, const ParamVector& g_main) {
  const double n_perp = norm(g_perp);
  const double n_main = norm(g_main);
  if (n_perp <= 1e-12 * n_main || n_perp == 0.0) {
    throw DegenerateGradient("rescale: ||g_perp|| = " + std::to_string(n_perp) +
                             " collapsed against ||g_main|| = " + std::to_string(n_main));
  }
  const double ratio = n_main / n_perp;
  if (ratio == 1.0) return g_perp;
  return scaled(g_perp, ratio);
}

ParamVector apply_update(const ParamVector& theta, const ParamVector& g, double eta) {
  return add_scaled(theta, -eta, g);
}

double capacity(const ParamVector& theta, const ParamVector& g_feat) {
  const double n = norm(g_feat);
  if (n == 0.0) throw Error("capacity: zero feature gradient");
  const double c = dot(theta, g_feat) / n;
  return c * c;
}

ProjectionReport projected_step(Denoiser& model, const Batch& batch, const Tensor& emb_main,
                                const Tensor& emb_feat, const NoiseSchedule& sched,
                                const ProjectionConfig& cfg, int step) {
  cfg.validate();
  PairGrads pg = compute_pair_grads(model, batch, emb_main, emb_feat, sched);

  ParamVector g_perp = project(pg.g_main, pg.g_feat, cfg);
  ParamVector g_proj = cfg.rescale_enabled ? rescale(g_perp, pg.g_main) : g_perp;

  ParamVector theta = model.trainable();

  ProjectionReport r;
  r.step = step;
  r.dot_main_feat = dot(pg.g_main, pg.g_feat);
  r.dot_proj_feat = dot(g_proj, pg.g_feat);
  r.norm_main = norm(pg.g_main);
  r.norm_perp = norm(g_perp);
  r.norm_proj = norm(g_proj);
  r.lambda_used = cfg.lambda;
  r.loss_main = pg.loss_main;
  r.loss_feat = pg.loss_feat;

  const double feat_norm = norm(pg.g_feat);
  r.capacity_before = feat_norm > 0.0 ? capacity(theta, pg.g_feat) : 0.0;

  ParamVector updated = apply_update(theta, g_proj, cfg.eta);
  r.capacity_after = feat_norm > 0.0 ? capacity(updated, pg.g_feat) : 0.0;

  model.set_trainable(updated);
  return r;
}

}  // namespace sgrad
