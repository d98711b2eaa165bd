#include "sgrad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#include "sgrad/csv.hpp"
#include "sgrad/error.hpp"
#include "sgrad/svg.hpp"

namespace sgrad {

namespace fs = std::filesystem;

bool RunReport::empty() const {
  return loss_curves.empty() && projection.empty() && metrics.empty() && leakage.empty() &&
         amplification.empty() && attacks.empty() && samples.empty();
}

const RunReport::MetricRow* RunReport::metric(const std::string& variant) const {
  for (const auto& m : metrics) {
    if (m.variant == variant) return &m;
  }
  return nullptr;
}

double RunReport::mean_attack_score(const std::string& variant) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& a : attacks) {
    if (a.variant == variant) {
      acc += a.final_copy_score;
      ++n;
    }
  }
  return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

FiniteDist estimate_model_dist(const Checkpoint& cp, const std::string& concept_id,
                               const Grid2d& grid, std::size_t n_samples, std::uint64_t seed) {
  if (cp.model.spec().data_dim != 2) {
    throw Error("estimate_model_dist: 2-D data required for the grid discretization");
  }
  const Tensor emb = cp.table.vec(concept_id);
  std::vector<std::uint64_t> counts(grid.cell_count(), 0);
  constexpr std::size_t kChunk = 4096;
  std::uint64_t chunk_idx = 0;
  for (std::size_t done = 0; done < n_samples; ++chunk_idx) {
    const std::size_t n = std::min(kChunk, n_samples - done);
    Rng rng = Rng::substream(seed, 0x1EAC'0000ULL + chunk_idx);
    Tensor pts = sample_chain(
        [&](const Tensor& xt, std::span<const int> ts) { return cp.model.predict(xt, ts, emb); },
        cp.schedule, n, 2, rng);
    for (std::size_t i = 0; i < n; ++i) {
      counts[static_cast<std::size_t>(grid.cell_of(pts.at(i, 0), pts.at(i, 1)))]++;
    }
    done += n;
  }
  return FiniteDist::from_counts(grid.support(), counts);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

void write_curve_csv(const fs::path& path, const std::vector<double>& curve) {
  CsvWriter w({"step", "loss"});
  for (std::size_t i = 0; i < curve.size(); ++i) {
    w.row({std::to_string(i), csv_double(curve[i])});
  }
  w.write(path);
}

void write_samples_csv(const fs::path& path, const Tensor& samples) {
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < samples.cols(); ++j) cols.push_back("x" + std::to_string(j));
  CsvWriter w(cols);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    std::vector<std::string> cells;
    cells.reserve(samples.cols());
    for (std::size_t j = 0; j < samples.cols(); ++j) cells.push_back(csv_double(samples.at(i, j)));
    w.row(cells);
  }
  w.write(path);
}

Tensor read_samples_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t d = t.header.size();
  Tensor out = Tensor::zeros({t.rows.size(), d});
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = std::stod(t.rows[i][j]);
  }
  return out;
}

}  // namespace

RunReport run_experiment_suite(const ExperimentConfig& cfg) {
  cfg.validate();
  RunReport rep;
  rep.out_dir = cfg.out_dir;
  rep.dataset_kind = cfg.dataset.kind;
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "config.resolved.txt", cfg.resolved());

  const SplitDataset data = synthesize_dataset(cfg.dataset);

  ProbeClassifier probe;
  bool have_probe = false;
  try {
    probe = calibrate_probe(data.general, cfg.seed);
    rep.probe_heldout_accuracy = probe.heldout_accuracy();
    have_probe = true;
  } catch (const std::exception& e) {
    rep.skipped["probe"] = e.what();
    rep.failed["probe"] = e.what();
  }

  std::optional<Checkpoint> pretrained;
  try {
    StageResult r;
    pretrained = run_pretrain(cfg, &r);
    rep.loss_curves["pretrain"] = r.loss_curve;
    write_curve_csv(cfg.out_dir / "pretrain_loss.csv", r.loss_curve);
    save_checkpoint(cfg.out_dir / "checkpoint_pretrained.sgrd", *pretrained);
  } catch (const std::exception& e) {
    rep.skipped["pretrain"] = e.what();
    rep.failed["pretrain"] = e.what();
  }

  std::optional<Checkpoint> naive;
  std::optional<Checkpoint> projected;
  if (!pretrained) {
    rep.skipped["finetune_naive"] = "pretrain failed";
    rep.skipped["finetune_projected"] = "pretrain failed";
  } else if (data.sensitive.size() == 0) {
    rep.skipped["finetune_naive"] = "sensitive split is empty";
    rep.skipped["finetune_projected"] = "sensitive split is empty";
  } else {
    try {
      StageResult r;
      naive = run_finetune(cfg, *pretrained, FinetuneMode::kNaive, &r);
      rep.loss_curves["finetune_naive"] = r.loss_curve;
      write_curve_csv(cfg.out_dir / "finetune_naive_loss.csv", r.loss_curve);
      save_checkpoint(cfg.out_dir / "checkpoint_naive.sgrd", *naive);
    } catch (const std::exception& e) {
      rep.skipped["finetune_naive"] = e.what();
      rep.failed["finetune_naive"] = e.what();
    }
    try {
      StageResult r;
      projected = run_finetune(cfg, *pretrained, FinetuneMode::kProjected, &r);
      rep.loss_curves["finetune_projected"] = r.loss_curve;
      rep.projection = r.reports;
      rep.capacity_frozen = r.capacity_frozen;
      rep.degenerate_skips = r.degenerate_skips;
      write_curve_csv(cfg.out_dir / "finetune_projected_loss.csv", r.loss_curve);
      std::string proj_csv = std::string(kProjectionCsvHeader) + "\n";
      for (const auto& pr : r.reports) proj_csv += projection_csv_row(pr) + "\n";
      write_text(cfg.out_dir / "projection.csv", proj_csv);
      CsvWriter cw({"step", "capacity_frozen"});
      for (std::size_t i = 0; i < r.capacity_frozen.size(); ++i) {
        cw.row({std::to_string(i), csv_double(r.capacity_frozen[i])});
      }
      cw.write(cfg.out_dir / "capacity_frozen.csv");
      save_checkpoint(cfg.out_dir / "checkpoint_projected.sgrd", *projected);
    } catch (const std::exception& e) {
      rep.skipped["finetune_projected"] = e.what();
      rep.failed["finetune_projected"] = e.what();
    }
  }

  const ProtectedSet protected_set{data.sensitive.x0, data.sensitive.concept_ids};
  const bool have_protected = data.sensitive.size() > 0;

  // Generation + metrics per available variant. The same sampling seed makes
  // the naive/projected comparison paired draw-for-draw.
  auto evaluate = [&](const std::string& variant, const Checkpoint& cp) {
    try {
      Tensor samples =
          sample_from_checkpoint(cp, data.pairing.main, cfg.eval.sample_count, cfg.seed);
      write_samples_csv(cfg.out_dir / ("samples_" + variant + ".csv"), samples);
      RunReport::MetricRow row;
      row.variant = variant;
      row.copy_score = have_protected ? copy_score(samples, protected_set)
                                      : std::numeric_limits<double>::quiet_NaN();
      row.concept_fidelity = have_probe ? concept_fidelity(samples, data.pairing.main, probe)
                                        : std::numeric_limits<double>::quiet_NaN();
      rep.metrics.push_back(row);
      rep.samples[variant] = std::move(samples);
    } catch (const std::exception& e) {
      rep.skipped["metrics_" + variant] = e.what();
      rep.failed["metrics_" + variant] = e.what();
    }
  };
  if (!have_protected) rep.skipped["copy_score"] = "sensitive split is empty";
  if (pretrained) evaluate("pretrained", *pretrained);
  if (naive) evaluate("naive", *naive);
  if (projected) evaluate("projected", *projected);

  // Leakage bound and amplification on the 2-D grid: the data side is the
  // empirical distribution of the main-concept caption family (general
  // samples of p_main plus the sensitive split).
  if (cfg.dataset.kind == "points2d" && pretrained) {
    try {
      Tensor all = Tensor::zeros({cfg.dataset.size, 2});
      std::size_t n_all = 0;
      std::vector<double> family;
      for (std::size_t i = 0; i < data.general.size(); ++i) {
        all.at(n_all, 0) = data.general.x0.at(i, 0);
        all.at(n_all, 1) = data.general.x0.at(i, 1);
        ++n_all;
        if (data.general.concept_ids[i] == data.pairing.main) {
          family.push_back(data.general.x0.at(i, 0));
          family.push_back(data.general.x0.at(i, 1));
        }
      }
      for (std::size_t i = 0; i < data.sensitive.size(); ++i) {
        all.at(n_all, 0) = data.sensitive.x0.at(i, 0);
        all.at(n_all, 1) = data.sensitive.x0.at(i, 1);
        ++n_all;
        family.push_back(data.sensitive.x0.at(i, 0));
        family.push_back(data.sensitive.x0.at(i, 1));
      }
      const Grid2d grid = Grid2d::from_data(all, cfg.eval.grid_resolution);
      const Tensor family_pts = Tensor::from_data({family.size() / 2, 2}, family);
      const FiniteDist data_dist = grid.histogram(family_pts);

      double sens_cx = 0.0, sens_cy = 0.0;
      points2d_center(cfg.dataset, cfg.dataset.sensitive_id, sens_cx, sens_cy);
      const double radius = 3.0 * cfg.dataset.sensitive_sigma;
      ConceptSet s;
      s.description = "within 3 sigma of the protected cluster center";
      s.member = [sens_cx, sens_cy, radius](std::span<const double> pt) {
        const double dx = pt[0] - sens_cx;
        const double dy = pt[1] - sens_cy;
        return dx * dx + dy * dy <= radius * radius;
      };
      const std::vector<bool> mask = grid.mask(s);

      std::size_t variant_idx = 0;
      auto leak_variant = [&](const std::string& variant, const Checkpoint& cp) {
        const FiniteDist model_dist = estimate_model_dist(
            cp, data.pairing.main, grid, cfg.eval.leakage_samples, cfg.seed + 31 * variant_idx);
        RunReport::LeakageRow row;
        row.variant = variant;
        row.report =
            verify_leakage_theorem(model_dist, data_dist, mask, cfg.eval.leakage_samples);
        rep.leakage.push_back(row);

        const double p_hat = mass(model_dist, mask);
        for (int n_draws : cfg.eval.amplification_draws) {
          RunReport::AmplificationRow ar;
          ar.variant = variant;
          ar.n_draws = n_draws;
          ar.p_hat = p_hat;
          ar.closed_form = 1.0 - std::pow(1.0 - p_hat, static_cast<double>(n_draws));
          ar.empirical = empirical_hit_rate(
              [&](Rng& rng, std::vector<double>& out) {
                out.resize(2);
                grid.cell_center(model_dist.support[model_dist.draw_index(rng)], out[0], out[1]);
              },
              s, n_draws, cfg.eval.amplification_trials,
              cfg.seed + 7919 * variant_idx + static_cast<std::uint64_t>(n_draws));
          ar.stderr_ = std::sqrt(std::max(ar.closed_form * (1.0 - ar.closed_form), 0.0) /
                                 static_cast<double>(cfg.eval.amplification_trials));
          ar.bound = amplification_prob(row.report.alpha, row.report.delta, n_draws);
          rep.amplification.push_back(ar);
        }
        ++variant_idx;
      };
      leak_variant("pretrained", *pretrained);
      if (naive) leak_variant("naive", *naive);
      if (projected) leak_variant("projected", *projected);
    } catch (const std::exception& e) {
      rep.skipped["leakage"] = e.what();
      rep.failed["leakage"] = e.what();
    }
  } else if (cfg.dataset.kind != "points2d") {
    rep.skipped["leakage"] = "grid discretization is for 2-D data";
  } else {
    rep.skipped["leakage"] = "pretrain failed";
  }

  // Adversarial A/B on the first protected targets, same seeds per target.
  if (naive && projected && have_protected) {
    try {
      const std::size_t n_targets = std::min<std::size_t>(cfg.attack.targets, data.sensitive.size());
      for (std::size_t k = 0; k < n_targets; ++k) {
        AttackConfig acfg;
        acfg.target = data.sensitive.x0.row(k);
        acfg.steps = cfg.attack.steps;
        acfg.lr = cfg.attack.lr;
        acfg.objective_draws = cfg.attack.objective_draws;
        acfg.score_samples = cfg.attack.score_samples;
        acfg.seed = cfg.seed ^ (0xA77A'0000ULL + k);
        AttackComparison cmp =
            attack_ab_compare(naive->model, projected->model, naive->schedule, acfg,
                              protected_set);
        rep.attacks.push_back({"naive", k, cmp.naive.final_copy_score, cmp.naive.loss_curve});
        rep.attacks.push_back(
            {"projected", k, cmp.projected.final_copy_score, cmp.projected.loss_curve});
      }
    } catch (const std::exception& e) {
      rep.skipped["attack"] = e.what();
      rep.failed["attack"] = e.what();
    }
  } else {
    rep.skipped["attack"] = "both fine-tuned variants required";
  }

  // Serialize the aggregate tables.
  {
    CsvWriter w({"variant", "copy_score", "concept_fidelity"});
    for (const auto& m : rep.metrics) {
      w.row({m.variant, csv_double(m.copy_score), csv_double(m.concept_fidelity)});
    }
    w.write(cfg.out_dir / "metrics.csv");
  }
  {
    CsvWriter w({"variant", "alpha", "delta", "model_mass", "mc_stderr", "bound", "holds"});
    for (const auto& l : rep.leakage) {
      w.row({l.variant, csv_double(l.report.alpha), csv_double(l.report.delta),
             csv_double(l.report.model_mass), csv_double(l.report.mc_stderr),
             csv_double(l.report.bound), l.report.holds ? "1" : "0"});
    }
    w.write(cfg.out_dir / "leakage.csv");
  }
  {
    CsvWriter w({"variant", "n_draws", "p_hat", "closed_form", "empirical", "stderr", "bound"});
    for (const auto& a : rep.amplification) {
      w.row({a.variant, std::to_string(a.n_draws), csv_double(a.p_hat),
             csv_double(a.closed_form), csv_double(a.empirical), csv_double(a.stderr_),
             csv_double(a.bound)});
    }
    w.write(cfg.out_dir / "amplification.csv");
  }
  {
    CsvWriter w({"variant", "target", "final_copy_score"});
    for (const auto& a : rep.attacks) {
      w.row({a.variant, std::to_string(a.target), csv_double(a.final_copy_score)});
    }
    w.write(cfg.out_dir / "attack_summary.csv");
  }
  {
    CsvWriter w({"variant", "target", "step", "loss"});
    for (const auto& a : rep.attacks) {
      for (std::size_t i = 0; i < a.curve.size(); ++i) {
        w.row({a.variant, std::to_string(a.target), std::to_string(i), csv_double(a.curve[i])});
      }
    }
    w.write(cfg.out_dir / "attack_curves.csv");
  }
  {
    CsvWriter w({"stage", "reason"});
    for (const auto& [stage, reason] : rep.skipped) w.row({stage, reason});
    w.write(cfg.out_dir / "skipped.csv");
  }

  // Scatter context for the 2-D plots.
  if (cfg.dataset.kind == "points2d") {
    std::size_t keep = std::min<std::size_t>(data.general.size(), 512);
    Tensor gen = Tensor::zeros({keep, 2});
    for (std::size_t i = 0; i < keep; ++i) {
      gen.at(i, 0) = data.general.x0.at(i, 0);
      gen.at(i, 1) = data.general.x0.at(i, 1);
    }
    rep.samples["general_data"] = std::move(gen);
    if (have_protected) rep.samples["protected"] = data.sensitive.x0;
  }

  emit_plots(rep, cfg.out_dir / "plots");
  write_text(cfg.out_dir / "report.txt", summarize(rep));
  return rep;
}

std::vector<fs::path> emit_plots(const RunReport& report, const fs::path& dir) {
  std::vector<fs::path> files;
  if (report.empty()) {
    std::cerr << "emit_plots: empty report, no files written\n";
    return files;
  }
  fs::create_directories(dir);

  {
    LinePlot p;
    p.title = "Training loss";
    p.x_label = "step";
    p.y_label = "DSM loss";
    for (const auto& [name, curve] : report.loss_curves) {
      Series s;
      s.name = name;
      s.color = "auto";
      for (std::size_t i = 0; i < curve.size(); ++i) {
        s.xs.push_back(static_cast<double>(i));
        s.ys.push_back(curve[i]);
      }
      p.series.push_back(std::move(s));
    }
    const fs::path f = dir / "loss_curves.svg";
    write_svg(f, render_line_plot(p));
    files.push_back(f);
  }
  {
    LinePlot p;
    p.title = "Per-step forbidden-direction alignment";
    p.x_label = "step";
    p.y_label = "|inner product| (log10)";
    p.log_y = true;
    Series pm, pf;
    pm.name = "|<g_main, g_feat>|";
    pm.color = "#1f77b4";
    pf.name = "|<g_proj, g_feat>|";
    pf.color = "#d62728";
    for (const auto& r : report.projection) {
      pm.xs.push_back(r.step);
      pm.ys.push_back(std::abs(r.dot_main_feat));
      pf.xs.push_back(r.step);
      pf.ys.push_back(std::abs(r.dot_proj_feat));
    }
    p.series = {pm, pf};
    const fs::path f = dir / "orthogonality.svg";
    write_svg(f, render_line_plot(p));
    files.push_back(f);
  }
  {
    LinePlot p;
    p.title = "Memorization capacity ledger";
    p.x_label = "step";
    p.y_label = "capacity";
    Series cb, ca, fr;
    cb.name = "before (step's own direction)";
    cb.color = "#1f77b4";
    ca.name = "after (step's own direction)";
    ca.color = "#d62728";
    fr.name = "frozen start direction (diagnostic)";
    fr.color = "#2ca02c";
    for (const auto& r : report.projection) {
      cb.xs.push_back(r.step);
      cb.ys.push_back(r.capacity_before);
      ca.xs.push_back(r.step);
      ca.ys.push_back(r.capacity_after);
    }
    for (std::size_t i = 0; i < report.capacity_frozen.size(); ++i) {
      fr.xs.push_back(static_cast<double>(i));
      fr.ys.push_back(report.capacity_frozen[i]);
    }
    p.series = {cb, ca, fr};
    const fs::path f = dir / "capacity.svg";
    write_svg(f, render_line_plot(p));
    files.push_back(f);
  }
  {
    LinePlot p;
    p.title = "Repeated-sampling amplification";
    p.x_label = "draws N";
    p.y_label = "hit probability";
    std::map<std::string, std::pair<Series, Series>> by_variant;
    std::size_t color_idx = 0;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
    for (const auto& a : report.amplification) {
      auto it = by_variant.find(a.variant);
      if (it == by_variant.end()) {
        Series emp, closed;
        emp.name = a.variant + " empirical";
        closed.name = a.variant + " closed form";
        emp.color = colors[color_idx % 3];
        closed.color = colors[color_idx % 3];
        ++color_idx;
        it = by_variant.emplace(a.variant, std::make_pair(emp, closed)).first;
      }
      it->second.first.xs.push_back(a.n_draws);
      it->second.first.ys.push_back(a.empirical);
      it->second.second.xs.push_back(a.n_draws);
      it->second.second.ys.push_back(a.closed_form);
    }
    for (auto& [variant, pair] : by_variant) {
      p.series.push_back(pair.second);
      p.series.push_back(pair.first);
    }
    const fs::path f = dir / "amplification.svg";
    write_svg(f, render_line_plot(p));
    files.push_back(f);
  }
  if (report.dataset_kind == "points2d" && !report.samples.empty()) {
    ScatterPlot p;
    p.title = "Generated samples vs data";
    p.x_label = "x";
    p.y_label = "y";
    for (const auto& [variant, pts] : report.samples) {
      if (pts.rank() != 2 || pts.cols() != 2) continue;
      ScatterGroup g;
      g.name = variant;
      g.color = "auto";
      g.radius = variant == "protected" ? 4.0 : 2.0;
      for (std::size_t i = 0; i < pts.rows(); ++i) {
        g.xs.push_back(pts.at(i, 0));
        g.ys.push_back(pts.at(i, 1));
      }
      p.groups.push_back(std::move(g));
    }
    const fs::path f = dir / "scatter.svg";
    write_svg(f, render_scatter_plot(p));
    files.push_back(f);
  }
  return files;
}

RunReport load_run_report(const fs::path& dir) {
  RunReport rep;
  rep.out_dir = dir;
  if (!fs::exists(dir)) throw Error("load_run_report: no such directory '" + dir.string() + "'");

  auto load_curve = [&](const std::string& stage, const std::string& file) {
    const fs::path p = dir / file;
    if (!fs::exists(p)) return;
    const CsvTable t = read_csv(p);
    std::vector<double> curve;
    curve.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) curve.push_back(t.value(i, "loss"));
    rep.loss_curves[stage] = std::move(curve);
  };
  load_curve("pretrain", "pretrain_loss.csv");
  load_curve("finetune_naive", "finetune_naive_loss.csv");
  load_curve("finetune_projected", "finetune_projected_loss.csv");

  if (fs::exists(dir / "projection.csv")) {
    const CsvTable t = read_csv(dir / "projection.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      ProjectionReport r;
      r.step = static_cast<int>(t.value(i, "step"));
      r.dot_main_feat = t.value(i, "dot_main_feat");
      r.dot_proj_feat = t.value(i, "dot_proj_feat");
      r.norm_main = t.value(i, "norm_main");
      r.norm_perp = t.value(i, "norm_perp");
      r.norm_proj = t.value(i, "norm_proj");
      r.capacity_before = t.value(i, "capacity_before");
      r.capacity_after = t.value(i, "capacity_after");
      r.lambda_used = t.value(i, "lambda_used");
      rep.projection.push_back(r);
    }
  }
  if (fs::exists(dir / "capacity_frozen.csv")) {
    const CsvTable t = read_csv(dir / "capacity_frozen.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      rep.capacity_frozen.push_back(t.value(i, "capacity_frozen"));
    }
  }
  if (fs::exists(dir / "metrics.csv")) {
    const CsvTable t = read_csv(dir / "metrics.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      RunReport::MetricRow m;
      m.variant = t.rows[i][t.column("variant")];
      m.copy_score = t.value(i, "copy_score");
      m.concept_fidelity = t.value(i, "concept_fidelity");
      rep.metrics.push_back(m);
    }
  }
  if (fs::exists(dir / "leakage.csv")) {
    const CsvTable t = read_csv(dir / "leakage.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      RunReport::LeakageRow l;
      l.variant = t.rows[i][t.column("variant")];
      l.report.alpha = t.value(i, "alpha");
      l.report.delta = t.value(i, "delta");
      l.report.model_mass = t.value(i, "model_mass");
      l.report.mc_stderr = t.value(i, "mc_stderr");
      l.report.bound = t.value(i, "bound");
      l.report.holds = t.value(i, "holds") != 0.0;
      rep.leakage.push_back(l);
    }
  }
  if (fs::exists(dir / "amplification.csv")) {
    const CsvTable t = read_csv(dir / "amplification.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      RunReport::AmplificationRow a;
      a.variant = t.rows[i][t.column("variant")];
      a.n_draws = static_cast<int>(t.value(i, "n_draws"));
      a.p_hat = t.value(i, "p_hat");
      a.closed_form = t.value(i, "closed_form");
      a.empirical = t.value(i, "empirical");
      a.stderr_ = t.value(i, "stderr");
      a.bound = t.value(i, "bound");
      rep.amplification.push_back(a);
    }
  }
  if (fs::exists(dir / "attack_summary.csv")) {
    const CsvTable t = read_csv(dir / "attack_summary.csv");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      RunReport::AttackRow a;
      a.variant = t.rows[i][t.column("variant")];
      a.target = static_cast<std::size_t>(t.value(i, "target"));
      a.final_copy_score = t.value(i, "final_copy_score");
      rep.attacks.push_back(a);
    }
  }
  for (const auto& variant : {"pretrained", "naive", "projected"}) {
    const fs::path p = dir / (std::string("samples_") + variant + ".csv");
    if (fs::exists(p)) rep.samples[variant] = read_samples_csv(p);
  }
  if (!rep.samples.empty() && rep.samples.begin()->second.cols() == 2) {
    rep.dataset_kind = "points2d";
  } else {
    rep.dataset_kind = "glyphs8x8";
  }
  if (fs::exists(dir / "skipped.csv")) {
    const CsvTable t = read_csv(dir / "skipped.csv");
    for (const auto& row : t.rows) {
      if (row.size() >= 2) rep.skipped[row[0]] = row[1];
    }
  }
  return rep;
}

std::string summarize(const RunReport& rep) {
  std::string s;
  s += "run: " + rep.out_dir.string() + "\n";
  char buf[256];
  if (rep.probe_heldout_accuracy > 0.0) {
    std::snprintf(buf, sizeof(buf), "probe held-out accuracy: %.4f\n",
                  rep.probe_heldout_accuracy);
    s += buf;
  }
  for (const auto& m : rep.metrics) {
    std::snprintf(buf, sizeof(buf), "%-10s copy_score=%.6f concept_fidelity=%.6f\n",
                  m.variant.c_str(), m.copy_score, m.concept_fidelity);
    s += buf;
  }
  const auto* n = rep.metric("naive");
  const auto* p = rep.metric("projected");
  if (n && p && n->copy_score > 0.0) {
    std::snprintf(buf, sizeof(buf),
                  "copy_score reduction (projected vs naive): %.2f%%\n",
                  100.0 * (n->copy_score - p->copy_score) / n->copy_score);
    s += buf;
  }
  for (const auto& l : rep.leakage) {
    std::snprintf(buf, sizeof(buf),
                  "leakage %-10s alpha=%.6f delta=%.6f model_mass=%.6f bound=%.6f holds=%s\n",
                  l.variant.c_str(), l.report.alpha, l.report.delta, l.report.model_mass,
                  l.report.bound, l.report.holds ? "yes" : "NO");
    s += buf;
  }
  for (const auto& a : rep.amplification) {
    std::snprintf(buf, sizeof(buf),
                  "amplification %-10s N=%-4d empirical=%.4f closed_form=%.4f bound=%.4f\n",
                  a.variant.c_str(), a.n_draws, a.empirical, a.closed_form, a.bound);
    s += buf;
  }
  if (!rep.attacks.empty()) {
    std::snprintf(buf, sizeof(buf), "attacked copy_score: naive=%.6f projected=%.6f\n",
                  rep.mean_attack_score("naive"), rep.mean_attack_score("projected"));
    s += buf;
  }
  if (rep.degenerate_skips > 0) {
    s += "degenerate-gradient steps skipped: " + std::to_string(rep.degenerate_skips) + "\n";
  }
  for (const auto& [stage, reason] : rep.skipped) {
    const bool failure = rep.failed.count(stage) > 0;
    s += (failure ? "FAILED " : "skipped ") + stage + ": " + reason + "\n";
  }
  return s;
}

}  // namespace sgrad
