#include "sgrad/attack.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "sgrad/diffusion.hpp"
#include "sgrad/error.hpp"

namespace sgrad {

void AttackConfig::validate() const {
  if (target.rank() != 1 || target.size() == 0) {
    throw Error("AttackConfig: target must be a rank-1 sample");
  }
  if (steps < 1) throw Error("AttackConfig: steps must be >= 1");
  // lr = 0 is allowed: it pins the embedding to its init (a no-op attack).
  if (!(lr >= 0.0)) throw Error("AttackConfig: lr must be >= 0");
  if (objective_draws < 1) throw Error("AttackConfig: objective_draws must be >= 1");
}

namespace {

// The fixed objective batch: the target repeated with stratified timesteps
// and seeded noise, so the attack loss is a deterministic function of the
// embedding alone.
Batch objective_batch(const Tensor& target, int draws, const NoiseSchedule& sched, Rng& rng) {
  const std::size_t d = target.size();
  Batch b;
  b.x0 = Tensor::zeros({static_cast<std::size_t>(draws), d});
  b.noise = Tensor::zeros({static_cast<std::size_t>(draws), d});
  b.timesteps.resize(static_cast<std::size_t>(draws));
  b.concept_ids.assign(static_cast<std::size_t>(draws), "attack_target");
  for (int i = 0; i < draws; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      b.x0.at(static_cast<std::size_t>(i), j) = target[j];
      b.noise.at(static_cast<std::size_t>(i), j) = rng.normal();
    }
    b.timesteps[static_cast<std::size_t>(i)] =
        1 + static_cast<int>(static_cast<std::size_t>(i) % sched.T);
  }
  return b;
}

double attack_loss_grad(const Denoiser& model, const Batch& batch, const Tensor& emb,
                        const NoiseSchedule& sched, Tensor* grad_out) {
  Tape tape;
  Var emb_var = tape.leaf(emb, /*requires_grad=*/grad_out != nullptr);
  Var loss = dsm_loss(
      tape,
      [&](Tape& t, const Tensor& xt, std::span<const int> ts) {
        Var x = t.leaf(xt, false);
        Var rows = model.emb_rows_from_vec(t, emb_var, xt.rows());
        // No trainable_vars: the model is frozen; only the embedding moves.
        return model.forward_graph(t, x, ts, rows, nullptr);
      },
      batch, sched);
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw NonFiniteError("attack: non-finite loss");
  if (grad_out != nullptr) {
    tape.backward(loss);
    *grad_out = emb_var.grad();
  }
  return value;
}

}  // namespace

AttackResult optimize_adversarial_embedding(const Denoiser& model, const NoiseSchedule& sched,
                                            const AttackConfig& cfg,
                                            const ProtectedSet& protected_set,
                                            const Tensor* main_emb) {
  cfg.validate();
  if (cfg.target.size() != model.spec().data_dim) {
    throw ShapeError("attack: target dimensionality does not match the model");
  }

  Rng rng = Rng::substream(cfg.seed, 0xA77A'0001ULL);
  const Batch batch = objective_batch(cfg.target, cfg.objective_draws, sched, rng);

  Tensor emb;
  if (cfg.init == AttackConfig::Init::kMainConcept) {
    if (main_emb == nullptr) throw Error("attack: main-concept init needs an embedding");
    emb = *main_emb;
  } else {
    emb = Tensor::randn({model.spec().emb_dim}, rng);
  }

  AttackResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(cfg.steps));

  double lr = cfg.lr;
  Tensor grad;
  double loss = attack_loss_grad(model, batch, emb, sched, &grad);
  result.init_loss = loss;

  for (int step = 0; step < cfg.steps; ++step) {
    bool moved = false;
    for (int attempt = 0; attempt <= 3; ++attempt) {
      Tensor candidate = emb;
      auto c = candidate.data();
      auto g = grad.data();
      for (std::size_t i = 0; i < c.size(); ++i) c[i] -= lr * g[i];
      const double cand_loss = attack_loss_grad(model, batch, candidate, sched, nullptr);
      if (cand_loss <= loss) {
        emb = std::move(candidate);
        loss = cand_loss;
        moved = true;
        break;
      }
      if (attempt < 3) {
        lr *= 0.5;
        ++result.lr_halvings;
      }
    }
    if (moved) {
      loss = attack_loss_grad(model, batch, emb, sched, &grad);
    }
    // If no candidate helped, the embedding stays and the curve holds flat.
    result.loss_curve.push_back(loss);
  }

  result.embedding = emb;

  Rng sample_rng = Rng::substream(cfg.seed, 0xA77A'0002ULL);
  Tensor generated = sample_chain(
      [&](const Tensor& xt, std::span<const int> ts) { return model.predict(xt, ts, emb); },
      sched, cfg.score_samples, model.spec().data_dim, sample_rng);
  result.final_copy_score = copy_score(generated, protected_set);
  return result;
}

AttackComparison attack_ab_compare(const Denoiser& model_naive, const Denoiser& model_projected,
                                   const NoiseSchedule& sched, const AttackConfig& cfg,
                                   const ProtectedSet& protected_set, const Tensor* main_emb) {
  if (!(model_naive.spec() == model_projected.spec())) {
    throw ShapeError("attack_ab_compare: mismatched architectures");
  }
  AttackComparison out;
  out.naive = optimize_adversarial_embedding(model_naive, sched, cfg, protected_set, main_emb);
  out.projected =
      optimize_adversarial_embedding(model_projected, sched, cfg, protected_set, main_emb);
  out.score_ratio = out.naive.final_copy_score > 0.0
                        ? out.projected.final_copy_score / out.naive.final_copy_score
                        : 0.0;
  return out;
}

}  // namespace sgrad
