// Acceptance gate: one pass/fail line per criterion, every tolerance pinned
// here. Exit code 0 only if all criteria pass.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "sgrad/attack.hpp"
#include "sgrad/checkpoint.hpp"
#include "sgrad/config.hpp"
#include "sgrad/denoiser.hpp"
#include "sgrad/diffusion.hpp"
#include "sgrad/error.hpp"
#include "sgrad/experiment.hpp"
#include "sgrad/projection.hpp"
#include "sgrad/trainer.hpp"

using namespace sgrad;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;
  int index = 0;

  void run(const std::string& name, const std::function<bool(std::string&)>& body) {
    ++index;
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1fs", secs);
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << index << ": " << name << " ("
              << buf << ")";
    if (!detail.empty()) std::cout << " -- " << detail;
    std::cout << "\n" << std::flush;
    if (!ok) ++failures;
  }
};

struct RandomStep {
  Denoiser model;
  Batch batch;
  Tensor emb_main;
  Tensor emb_feat;
  NoiseSchedule sched;
};

RandomStep make_random_step(std::uint64_t seed) {
  RandomStep s;
  Rng rng = Rng::substream(seed, 0xACCE97ULL);
  DenoiserSpec spec{.data_dim = 2, .hidden = 12, .time_dim = 4, .emb_dim = 6};
  s.model = Denoiser::init(spec, rng, Denoiser::HeadInit::kRandom);
  s.sched = make_schedule(8, 1e-3, 0.08);
  s.emb_main = Tensor::randn({6}, rng);
  s.emb_feat = Tensor::randn({6}, rng);
  const std::size_t n = 4;
  s.batch.x0 = Tensor::randn({n, 2}, rng);
  s.batch.noise = Tensor::randn({n, 2}, rng);
  s.batch.timesteps.resize(n);
  for (auto& t : s.batch.timesteps) t = 1 + static_cast<int>(rng.below(s.sched.T));
  s.batch.concept_ids.assign(n, "c");
  return s;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// The paper-direction experiment configs. Everything else comes from the
// defaults; the two suites differ only in the sensitive-split size and the
// attacked-target count.
ExperimentConfig suite_config(const fs::path& out, bool multi_sample) {
  ExperimentConfig cfg;
  cfg.out_dir = out;
  cfg.seed = 1;
  if (multi_sample) {
    cfg.dataset.sensitive_fraction = 0.04;  // 80 of 2000
    cfg.attack.targets = 4;
  } else {
    cfg.dataset.sensitive_fraction = 0.0005;  // single sample
    cfg.attack.targets = 1;
  }
  return cfg;
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "sgrad_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  Harness h;
  RunReport report6, report7;
  bool have6 = false, have7 = false;

  // 1. Orthogonality theorem: lambda=1, eps=0, 1000 random steps.
  h.run("orthogonality <g_proj, g_feat> = 0 at lambda=1, eps=0 (1000 steps)", [&](std::string& d) {
    ProjectionConfig cfg{.lambda = 1.0, .epsilon = 0.0, .eta = 0.01, .rescale_enabled = true};
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
      RandomStep s = make_random_step(trial);
      PairGrads pg = compute_pair_grads(s.model, s.batch, s.emb_main, s.emb_feat, s.sched);
      ParamVector g_proj = rescale(project(pg.g_main, pg.g_feat, cfg), pg.g_main);
      const double rel =
          std::abs(dot(g_proj, pg.g_feat)) / (norm(g_proj) * norm(pg.g_feat));
      worst = std::max(worst, rel);
    }
    d = "worst relative inner product " + fmt(worst);
    return worst <= 1e-9;
  });

  // 2. First-order neutrality of the feature loss along -g_proj.
  h.run("first-order neutrality of L_feat along -g_proj (100 steps, h=1e-5)", [&](std::string& d) {
    ProjectionConfig cfg{.lambda = 1.0, .epsilon = 0.0, .eta = 0.01, .rescale_enabled = true};
    double worst_ratio = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      RandomStep s = make_random_step(5000 + trial);
      PairGrads pg = compute_pair_grads(s.model, s.batch, s.emb_main, s.emb_feat, s.sched);
      ParamVector g_proj = rescale(project(pg.g_main, pg.g_feat, cfg), pg.g_main);
      const ParamVector theta = s.model.trainable();
      auto feat_loss_at = [&](const ParamVector& t) {
        Denoiser m = s.model;
        m.set_trainable(t);
        return dsm_loss_grad(m, s.batch, s.emb_feat, s.sched, nullptr);
      };
      const double hstep = 1e-5;
      const double lp = feat_loss_at(add_scaled(theta, -hstep, g_proj));
      const double lm = feat_loss_at(add_scaled(theta, hstep, g_proj));
      const double directional = (lp - lm) / (2.0 * hstep);
      worst_ratio = std::max(worst_ratio, std::abs(directional) / norm(pg.g_feat));
    }
    d = "worst |directional derivative| / ||g_feat|| = " + fmt(worst_ratio);
    return worst_ratio <= 1e-3;
  });

  // 3. Capacity invariance per step.
  h.run("capacity invariance (lambda=1: 1e-9 relative; eps=1e-8: 1e-6)", [&](std::string& d) {
    ProjectionConfig exact{.lambda = 1.0, .epsilon = 0.0, .eta = 0.01, .rescale_enabled = true};
    double worst_exact = 0.0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
      RandomStep s = make_random_step(9000 + trial);
      ProjectionReport r =
          projected_step(s.model, s.batch, s.emb_main, s.emb_feat, s.sched, exact, 0);
      worst_exact = std::max(worst_exact, std::abs(r.capacity_after - r.capacity_before) /
                                              (1.0 + r.capacity_before));
    }
    ProjectionConfig stabilized{.lambda = 1.0, .epsilon = 1e-8, .eta = 0.01,
                                .rescale_enabled = true};
    double worst_eps = 0.0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
      RandomStep s = make_random_step(20000 + trial);
      ProjectionReport r =
          projected_step(s.model, s.batch, s.emb_main, s.emb_feat, s.sched, stabilized, 0);
      worst_eps = std::max(worst_eps, std::abs(r.capacity_after - r.capacity_before));
    }
    d = "worst |dM|/(1+M) = " + fmt(worst_exact) + " (exact), worst |dM| = " + fmt(worst_eps) +
        " (eps=1e-8)";
    return worst_exact <= 1e-9 && worst_eps <= 1e-6;
  });

  // 4. Gradient correctness on the full denoiser DSM loss.
  h.run("finite-difference check of the DSM gradient (20 random configurations)",
        [&](std::string& d) {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      Rng rng = Rng::substream(777, trial);
      DenoiserSpec spec;
      spec.data_dim = 2;
      spec.hidden = 8 + rng.below(16);
      spec.time_dim = rng.below(2) == 0 ? 4 : 8;
      spec.emb_dim = 4 + rng.below(8);
      Denoiser model = Denoiser::init(spec, rng, Denoiser::HeadInit::kRandom);
      const Tensor emb = Tensor::randn({spec.emb_dim}, rng);
      NoiseSchedule sched = make_schedule(8, 1e-3, 0.08);
      const std::size_t n = 3 + rng.below(3);
      Batch b;
      b.x0 = Tensor::randn({n, 2}, rng);
      b.noise = Tensor::randn({n, 2}, rng);
      b.timesteps.resize(n);
      for (auto& t : b.timesteps) t = 1 + static_cast<int>(rng.below(sched.T));
      b.concept_ids.assign(n, "c");

      auto loss = [&](const ParamVector& pv) {
        Denoiser m = model;
        m.set_trainable(pv);
        return dsm_loss_grad(m, b, emb, sched, nullptr);
      };
      auto grad = [&](const ParamVector& pv) {
        Denoiser m = model;
        m.set_trainable(pv);
        ParamVector g;
        dsm_loss_grad(m, b, emb, sched, &g);
        return g;
      };
      worst = std::max(worst, finite_diff_check(loss, grad, model.trainable(), 1e-5));
    }
    d = "worst max relative error " + fmt(worst);
    return worst <= 1e-4;
  });

  // 5. lambda = 0 equivalence, bit-identical checkpoints.
  h.run("lambda=0 projected run is bit-identical to the naive run", [&](std::string& d) {
    bool all_ok = true;
    for (const bool rescale_on : {false, true}) {
      ExperimentConfig cfg;
      cfg.out_dir = root / (rescale_on ? "c5_rescale" : "c5");
      cfg.dataset.size = 400;
      cfg.dataset.sensitive_fraction = 0.01;
      cfg.model.hidden = 16;
      cfg.schedule.T = 10;
      cfg.pretrain.steps = 100;
      cfg.finetune.steps = 50;
      cfg.projection.lambda = 0.0;
      cfg.projection.rescale = rescale_on;
      cfg.seed = 3;
      fs::create_directories(cfg.out_dir);
      Checkpoint pre = run_pretrain(cfg);
      Checkpoint naive = run_finetune(cfg, pre, FinetuneMode::kNaive);
      Checkpoint projected = run_finetune(cfg, pre, FinetuneMode::kProjected);
      projected.stage = naive.stage;  // only the tag may differ
      save_checkpoint(cfg.out_dir / "naive.sgrd", naive);
      save_checkpoint(cfg.out_dir / "projected.sgrd", projected);
      all_ok = all_ok && file_bytes(cfg.out_dir / "naive.sgrd") ==
                             file_bytes(cfg.out_dir / "projected.sgrd");
    }
    d = all_ok ? "checkpoints byte-identical (rescale on and off)" : "checkpoints differ";
    return all_ok;
  });

  // 6. Single-sample A/B.
  h.run("single-sample A/B: naive >= 0.95, projected lower by >= 10%, fidelity within 5%",
        [&](std::string& d) {
    const auto start = std::chrono::steady_clock::now();
    report6 = run_experiment_suite(suite_config(root / "c6", false));
    have6 = true;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto* n = report6.metric("naive");
    const auto* p = report6.metric("projected");
    if (n == nullptr || p == nullptr) {
      d = "missing variant metrics";
      return false;
    }
    const double rel_drop = (n->copy_score - p->copy_score) / n->copy_score;
    const double fid_rel = std::abs(p->concept_fidelity - n->concept_fidelity) /
                           n->concept_fidelity;
    d = "naive copy " + fmt(n->copy_score) + ", projected " + fmt(p->copy_score) + " (-" +
        fmt(100.0 * rel_drop) + "%), fidelity gap " + fmt(100.0 * fid_rel) + "%, " +
        fmt(secs) + "s";
    return n->copy_score >= 0.95 && rel_drop >= 0.10 && fid_rel <= 0.05 && secs < 300.0;
  });

  // 7. Multi-sample A/B (80 sensitive samples).
  h.run("multi-sample A/B (80 samples): projected < naive, fidelity within 5%",
        [&](std::string& d) {
    const auto start = std::chrono::steady_clock::now();
    report7 = run_experiment_suite(suite_config(root / "c7", true));
    have7 = true;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto* n = report7.metric("naive");
    const auto* p = report7.metric("projected");
    if (n == nullptr || p == nullptr) {
      d = "missing variant metrics";
      return false;
    }
    const double fid_rel = std::abs(p->concept_fidelity - n->concept_fidelity) /
                           n->concept_fidelity;
    d = "naive copy " + fmt(n->copy_score) + ", projected " + fmt(p->copy_score) +
        ", fidelity gap " + fmt(100.0 * fid_rel) + "%, " + fmt(secs) + "s";
    return p->copy_score < n->copy_score && fid_rel <= 0.05 && secs < 900.0;
  });

  // 8. TV leakage bound and sampling amplification, all tested models/stages.
  h.run("leakage bound and amplification tolerances on the 32x32 grid", [&](std::string& d) {
    if (!have6 || !have7) {
      d = "suite runs unavailable";
      return false;
    }
    bool ok = true;
    std::size_t rows = 0;
    for (const RunReport* rep : {&report6, &report7}) {
      for (const auto& l : rep->leakage) {
        ok = ok && l.report.holds;
        ++rows;
      }
      for (const auto& a : rep->amplification) {
        const double tol = std::max(0.05, 3.0 * a.stderr_);
        ok = ok && std::abs(a.empirical - a.closed_form) <= tol;
      }
    }
    d = fmt(static_cast<double>(rows)) + " leakage rows across stages, all bounds hold: " +
        (ok ? "yes" : "no");
    return ok && rows >= 6;
  });

  // 9. Adversarial A/B on the multi-sample models.
  h.run("attacked copy score: projected < naive on the same targets and seeds",
        [&](std::string& d) {
    if (!have7) {
      d = "multi-sample run unavailable";
      return false;
    }
    const double n = report7.mean_attack_score("naive");
    const double p = report7.mean_attack_score("projected");
    std::size_t targets = 0;
    for (const auto& a : report7.attacks) {
      if (a.variant == "naive") ++targets;
    }
    d = "mean over " + fmt(static_cast<double>(targets)) + " targets: naive " + fmt(n) +
        ", projected " + fmt(p);
    return targets >= 1 && p < n;
  });

  // 10. Checkpoint persistence across all stages.
  h.run("checkpoint round-trips are byte-identical; corrupt files rejected",
        [&](std::string& d) {
    if (!have6 || !have7) {
      d = "suite runs unavailable";
      return false;
    }
    bool ok = true;
    int roundtrips = 0;
    for (const fs::path dir : {root / "c6", root / "c7"}) {
      for (const char* name :
           {"checkpoint_pretrained.sgrd", "checkpoint_naive.sgrd", "checkpoint_projected.sgrd"}) {
        const fs::path src = dir / name;
        Checkpoint cp = load_checkpoint(src);
        const fs::path dst = dir / (std::string("roundtrip_") + name);
        save_checkpoint(dst, cp);
        ok = ok && file_bytes(src) == file_bytes(dst);
        ++roundtrips;
      }
    }
    // Corruption: wrong magic, truncation, unsupported version.
    const fs::path good = root / "c6" / "checkpoint_pretrained.sgrd";
    std::vector<char> bytes = file_bytes(good);
    const fs::path bad_magic = root / "bad_magic.sgrd";
    {
      std::vector<char> b = bytes;
      b[0] = 'X';
      std::ofstream(bad_magic, std::ios::binary).write(b.data(),
                                                       static_cast<std::streamsize>(b.size()));
    }
    const fs::path truncated = root / "truncated.sgrd";
    std::ofstream(truncated, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 3));
    const fs::path bad_version = root / "bad_version.sgrd";
    {
      std::vector<char> b = bytes;
      b[4] = 42;
      std::ofstream(bad_version, std::ios::binary).write(b.data(),
                                                         static_cast<std::streamsize>(b.size()));
    }
    int rejected = 0;
    for (const fs::path& p : {bad_magic, truncated, bad_version}) {
      try {
        (void)load_checkpoint(p);
      } catch (const CheckpointError&) {
        ++rejected;
      }
    }
    d = fmt(static_cast<double>(roundtrips)) + " round-trips byte-identical: " +
        (ok ? "yes" : "no") + ", corrupt files rejected: " + fmt(rejected) + "/3";
    return ok && rejected == 3;
  });

  // 11. Reproducibility: identical config+seed gives byte-identical CSVs.
  h.run("repeat run emits byte-identical report CSVs", [&](std::string& d) {
    if (!have6) {
      d = "single-sample run unavailable";
      return false;
    }
    run_experiment_suite(suite_config(root / "c11", false));
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(root / "c6")) {
      if (entry.path().extension() != ".csv") continue;
      const fs::path other = root / "c11" / entry.path().filename();
      if (!fs::exists(other) || file_bytes(entry.path()) != file_bytes(other)) {
        d = "mismatch in " + entry.path().filename().string();
        return false;
      }
      ++compared;
    }
    d = fmt(static_cast<double>(compared)) + " CSV files byte-identical";
    return compared >= 10;
  });

  std::cout << (h.failures == 0 ? "ACCEPTANCE: all criteria passed\n"
                                : "ACCEPTANCE: " + std::to_string(h.failures) +
                                      " criterion(s) failed\n");
  return h.failures == 0 ? 0 : 1;
}
