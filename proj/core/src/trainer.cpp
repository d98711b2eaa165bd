#include "sgrad/trainer.hpp"

#include <string>
#include <utility>

#include "sgrad/error.hpp"

namespace sgrad {
namespace {

constexpr std::uint64_t kPretrainStream = 0x57A6'0001ULL;
constexpr std::uint64_t kFinetuneStream = 0x57A6'0002ULL;
constexpr std::uint64_t kInitStream = 0x57A6'0003ULL;
constexpr std::uint64_t kSampleStream = 0x57A6'0004ULL;

// Divergence guard: abort when loss > 10x the initial loss for 100
// consecutive steps.
class DivergenceGuard {
 public:
  void observe(double loss, std::size_t step, const char* stage) {
    if (!initialized_) {
      initial_ = loss;
      initialized_ = true;
      return;
    }
    if (loss > 10.0 * initial_) {
      if (++streak_ >= 100) {
        throw DivergenceError(std::string(stage) + ": loss " + std::to_string(loss) +
                              " exceeded 10x initial (" + std::to_string(initial_) +
                              ") for 100 consecutive steps, at step " + std::to_string(step));
      }
    } else {
      streak_ = 0;
    }
  }

 private:
  double initial_ = 0.0;
  std::size_t streak_ = 0;
  bool initialized_ = false;
};

// Pretraining gradient over model parameters plus the embedding table, with
// per-row concept conditioning through the one-hot table path.
double pretrain_loss_grad(const Denoiser& model, const EmbeddingTable& table, const Batch& batch,
                          const NoiseSchedule& sched, ParamVector* grad_out) {
  std::vector<std::size_t> rows(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    rows[i] = table.index_of(batch.concept_ids[i]);
  }
  Tape tape;
  std::vector<Var> trainable_vars;
  Var table_var = tape.leaf(table.matrix(), /*requires_grad=*/grad_out != nullptr);
  Var loss = dsm_loss(
      tape,
      [&](Tape& t, const Tensor& xt, std::span<const int> ts) {
        Var x = t.leaf(xt, false);
        Var emb_rows = model.emb_rows_from_table(t, table_var, rows);
        return model.forward_graph(t, x, ts, emb_rows, &trainable_vars);
      },
      batch, sched);
  if (grad_out != nullptr) {
    tape.backward(loss);
    ParamVector layout = model.trainable();
    ParamVector g;
    for (std::size_t i = 0; i < layout.segment_count(); ++i) {
      g.append(layout.segment(i).name, trainable_vars[i].grad());
    }
    g.append("embeddings", table_var.grad());
    *grad_out = std::move(g);
  }
  return loss.value().item();
}

}  // namespace

Batch draw_batch(const Dataset& data, std::size_t batch_size, const NoiseSchedule& sched,
                 Rng& rng) {
  if (data.size() == 0) throw Error("draw_batch: empty dataset");
  if (batch_size == 0) throw Error("draw_batch: batch size must be >= 1");
  const std::size_t d = data.x0.cols();
  Batch b;
  b.x0 = Tensor::zeros({batch_size, d});
  b.noise = Tensor::zeros({batch_size, d});
  b.timesteps.resize(batch_size);
  b.concept_ids.resize(batch_size);
  // Fixed draw order: indices, then timesteps, then noise.
  std::vector<std::size_t> idx(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) idx[i] = rng.below(data.size());
  for (std::size_t i = 0; i < batch_size; ++i) {
    b.timesteps[i] = 1 + static_cast<int>(rng.below(sched.T));
  }
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      b.x0.at(i, j) = data.x0.at(idx[i], j);
      b.noise.at(i, j) = rng.normal();
    }
    b.concept_ids[i] = data.concept_ids[idx[i]];
  }
  return b;
}

Checkpoint run_pretrain(const ExperimentConfig& cfg, StageResult* result,
                        const BatchObserver& observer) {
  cfg.validate();
  const SplitDataset data = synthesize_dataset(cfg.dataset);
  if (data.general.size() == 0) throw Error("run_pretrain: general split is empty");

  Rng init_rng = Rng::substream(cfg.seed, kInitStream);
  Checkpoint cp;
  cp.model = Denoiser::init(cfg.denoiser_spec(), init_rng);
  cp.table = EmbeddingTable::init(cfg.dataset.all_concept_ids(), cfg.model.emb_dim, init_rng);
  if (cfg.dataset.prompt_overlap > 0.0) {
    // The suppress caption shares its subject with the main caption.
    cp.table.set_pair_overlap(cfg.dataset.sensitive_feat, cfg.dataset.sensitive_main,
                              cfg.dataset.prompt_overlap);
  }
  cp.schedule = make_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
  cp.stage = "init";

  Rng rng = Rng::substream(cfg.seed, kPretrainStream);
  DivergenceGuard guard;
  StageResult local;

  for (std::size_t step = 0; step < cfg.pretrain.steps; ++step) {
    Batch batch = draw_batch(data.general, cfg.pretrain.batch, cp.schedule, rng);
    if (observer) observer(batch);

    ParamVector grad;
    const double loss = pretrain_loss_grad(cp.model, cp.table, batch, cp.schedule, &grad);
    local.loss_curve.push_back(loss);
    guard.observe(loss, step, "pretrain");

    ParamVector theta = cp.model.trainable();
    theta.append("embeddings", cp.table.matrix());
    ParamVector updated = apply_update(theta, grad, cfg.pretrain.lr);

    Tensor new_table = updated.tensor("embeddings");
    ParamVector model_part;
    for (const auto& s : updated.segments()) {
      if (s.name != "embeddings") model_part.append(s.name, s.tensor);
    }
    cp.model.set_trainable(model_part);
    cp.table.set_matrix(std::move(new_table));
  }

  cp.stage = "pretrained";
  // The table is the stand-in for a frozen text encoder from here on.
  cp.table.set_trainable(false);
  cp.rng_state = rng.state();
  if (result) *result = std::move(local);
  return cp;
}

Checkpoint run_finetune(const ExperimentConfig& cfg, const Checkpoint& pretrained,
                        FinetuneMode mode, StageResult* result, const BatchObserver& observer) {
  cfg.validate();
  const SplitDataset data = synthesize_dataset(cfg.dataset);
  if (data.sensitive.size() == 0) throw Error("run_finetune: sensitive split is empty");

  Checkpoint cp = pretrained;
  cp.stage = mode == FinetuneMode::kNaive ? "finetuned_naive" : "finetuned_projected";

  if (cfg.model.finetune_mode == "adapters") {
    Rng adapter_rng = Rng::substream(cfg.seed, kInitStream + 7);
    cp.model.attach_adapters(cfg.model.adapter_rank, cfg.model.adapter_layers, adapter_rng);
  }

  const Tensor emb_main = cp.table.vec(data.pairing.main);
  const Tensor emb_feat = cp.table.vec(data.pairing.feat);

  const ProjectionConfig pcfg = cfg.projection_config(cfg.finetune.lr);

  // One RNG stream regardless of mode: the two runs differ only in the
  // update rule.
  Rng rng = Rng::substream(cfg.seed, kFinetuneStream);
  DivergenceGuard guard;
  StageResult local;

  // Frozen reference direction for the capacity diagnostic, captured at
  // fine-tune start. Purely diagnostic: the guarantees are per-step.
  ParamVector frozen_dir;
  bool have_frozen_dir = false;
  {
    Rng probe_rng = rng;  // copy; does not advance the training stream
    Batch probe = draw_batch(data.sensitive, cfg.finetune.batch, cp.schedule, probe_rng);
    dsm_loss_grad(cp.model, probe, emb_feat, cp.schedule, &frozen_dir);
    have_frozen_dir = norm(frozen_dir) > 0.0;
  }

  for (std::size_t step = 0; step < cfg.finetune.steps; ++step) {
    Batch batch = draw_batch(data.sensitive, cfg.finetune.batch, cp.schedule, rng);
    if (observer) observer(batch);

    double loss = 0.0;
    if (mode == FinetuneMode::kNaive) {
      ParamVector g_main;
      loss = dsm_loss_grad(cp.model, batch, emb_main, cp.schedule, &g_main);
      cp.model.set_trainable(apply_update(cp.model.trainable(), g_main, cfg.finetune.lr));
    } else {
      try {
        ProjectionReport report = projected_step(cp.model, batch, emb_main, emb_feat,
                                                 cp.schedule, pcfg, static_cast<int>(step));
        loss = report.loss_main;
        local.reports.push_back(report);
      } catch (const DegenerateGradient&) {
        ++local.degenerate_skips;
        // Step skipped; keep the curve aligned with the step index.
        loss = local.loss_curve.empty() ? 0.0 : local.loss_curve.back();
      }
    }
    local.loss_curve.push_back(loss);
    guard.observe(loss, step, mode == FinetuneMode::kNaive ? "finetune_naive"
                                                           : "finetune_projected");
    if (mode == FinetuneMode::kProjected && have_frozen_dir) {
      local.capacity_frozen.push_back(capacity(cp.model.trainable(), frozen_dir));
    }
  }

  cp.rng_state = rng.state();
  if (result) *result = std::move(local);
  return cp;
}

Tensor sample_from_checkpoint(const Checkpoint& cp, const std::string& concept_id, std::size_t n,
                              std::uint64_t seed) {
  const Tensor emb = cp.table.vec(concept_id);
  Rng rng = Rng::substream(seed, kSampleStream);
  return sample_chain(
      [&](const Tensor& xt, std::span<const int> ts) { return cp.model.predict(xt, ts, emb); },
      cp.schedule, n, cp.model.spec().data_dim, rng);
}

}  // namespace sgrad
