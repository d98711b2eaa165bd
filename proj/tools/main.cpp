// Command-line front end: dataset synthesis, the two-stage training protocol,
// the extraction attack, leakage verification, and full experiment suites.
//
// Exit codes: 0 success, 1 stage failure, 2 configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgrad/attack.hpp"
#include "sgrad/checkpoint.hpp"
#include "sgrad/config.hpp"
#include "sgrad/csv.hpp"
#include "sgrad/dataset.hpp"
#include "sgrad/error.hpp"
#include "sgrad/experiment.hpp"
#include "sgrad/leakage.hpp"
#include "sgrad/metrics.hpp"
#include "sgrad/svg.hpp"
#include "sgrad/trainer.hpp"

namespace fs = std::filesystem;
using namespace sgrad;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? ExperimentConfig{} : parse_config_file(opts.config_path);
  for (const auto& kv : opts.overrides) apply_override(cfg, kv);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (key=value lines)");
  cmd->add_option("--set", opts.overrides, "Override, e.g. --set projection.lambda=1.0");
  cmd->add_option("--seed", opts.seed, "Run seed (overrides config)");
  cmd->add_option("--out", opts.out, "Output directory (overrides config)");
}

void write_dataset_csv(const fs::path& path, const Dataset& d) {
  std::vector<std::string> cols = {"concept"};
  const std::size_t dim = d.size() > 0 ? d.x0.cols() : 0;
  for (std::size_t j = 0; j < dim; ++j) cols.push_back("x" + std::to_string(j));
  CsvWriter w(cols);
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::string> cells = {d.concept_ids[i]};
    for (std::size_t j = 0; j < dim; ++j) cells.push_back(csv_double(d.x0.at(i, j)));
    w.row(cells);
  }
  w.write(path);
}

int cmd_synth(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  fs::create_directories(cfg.out_dir);
  SplitDataset data = synthesize_dataset(cfg.dataset);
  write_dataset_csv(cfg.out_dir / "dataset_general.csv", data.general);
  write_dataset_csv(cfg.out_dir / "dataset_sensitive.csv", data.sensitive);
  std::cout << "general: " << data.general.size()
            << " samples, sensitive: " << data.sensitive.size() << " samples\n"
            << "pairing: " << data.pairing.composite << " -> (" << data.pairing.main << ", "
            << data.pairing.feat << ")\n"
            << "wrote " << (cfg.out_dir / "dataset_general.csv").string() << "\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  fs::create_directories(cfg.out_dir);
  StageResult r;
  Checkpoint cp = run_pretrain(cfg, &r);
  save_checkpoint(cfg.out_dir / "checkpoint_pretrained.sgrd", cp);
  CsvWriter w({"step", "loss"});
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
    w.row({std::to_string(i), csv_double(r.loss_curve[i])});
  }
  w.write(cfg.out_dir / "pretrain_loss.csv");
  std::cout << "pretrained " << cfg.pretrain.steps << " steps";
  if (!r.loss_curve.empty()) {
    std::cout << ", loss " << r.loss_curve.front() << " -> " << r.loss_curve.back();
  }
  std::cout << "\nwrote " << (cfg.out_dir / "checkpoint_pretrained.sgrd").string() << "\n";
  return 0;
}

int cmd_finetune(const CommonOpts& opts, const std::string& mode_name,
                 const std::string& checkpoint_path) {
  ExperimentConfig cfg = resolve_config(opts);
  fs::create_directories(cfg.out_dir);
  const FinetuneMode mode = mode_name == "naive" ? FinetuneMode::kNaive
                                                 : FinetuneMode::kProjected;
  Checkpoint pre = load_checkpoint(checkpoint_path);
  StageResult r;
  Checkpoint cp = run_finetune(cfg, pre, mode, &r);
  const std::string tag = mode == FinetuneMode::kNaive ? "naive" : "projected";
  save_checkpoint(cfg.out_dir / ("checkpoint_" + tag + ".sgrd"), cp);
  CsvWriter w({"step", "loss"});
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
    w.row({std::to_string(i), csv_double(r.loss_curve[i])});
  }
  w.write(cfg.out_dir / ("finetune_" + tag + "_loss.csv"));
  if (mode == FinetuneMode::kProjected) {
    std::string csv = std::string(kProjectionCsvHeader) + "\n";
    for (const auto& pr : r.reports) csv += projection_csv_row(pr) + "\n";
    std::ofstream out(cfg.out_dir / "projection.csv", std::ios::binary | std::ios::trunc);
    out << csv;
    std::cout << "projection ledger: " << r.reports.size() << " steps, " << r.degenerate_skips
              << " degenerate skips\n";
  }
  std::cout << "wrote " << (cfg.out_dir / ("checkpoint_" + tag + ".sgrd")).string() << "\n";
  return 0;
}

int cmd_attack(const CommonOpts& opts, const std::string& checkpoint_path,
               const std::string& compare_path) {
  ExperimentConfig cfg = resolve_config(opts);
  fs::create_directories(cfg.out_dir);
  Checkpoint cp = load_checkpoint(checkpoint_path);
  SplitDataset data = synthesize_dataset(cfg.dataset);
  if (data.sensitive.size() == 0) throw Error("attack: sensitive split is empty");
  ProtectedSet prot{data.sensitive.x0, data.sensitive.concept_ids};

  const std::size_t n_targets = std::min<std::size_t>(cfg.attack.targets, data.sensitive.size());
  CsvWriter summary({"variant", "target", "final_copy_score"});
  CsvWriter curves({"variant", "target", "step", "loss"});
  for (std::size_t k = 0; k < n_targets; ++k) {
    AttackConfig acfg;
    acfg.target = data.sensitive.x0.row(k);
    acfg.steps = cfg.attack.steps;
    acfg.lr = cfg.attack.lr;
    acfg.objective_draws = cfg.attack.objective_draws;
    acfg.score_samples = cfg.attack.score_samples;
    acfg.seed = cfg.seed ^ (0xA77A'0000ULL + k);
    if (compare_path.empty()) {
      AttackResult r = optimize_adversarial_embedding(cp.model, cp.schedule, acfg, prot);
      summary.row({"model", std::to_string(k), csv_double(r.final_copy_score)});
      for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
        curves.row({"model", std::to_string(k), std::to_string(i), csv_double(r.loss_curve[i])});
      }
      std::cout << "target " << k << ": attacked copy_score " << r.final_copy_score << "\n";
    } else {
      Checkpoint other = load_checkpoint(compare_path);
      AttackComparison cmp = attack_ab_compare(cp.model, other.model, cp.schedule, acfg, prot);
      summary.row({"model", std::to_string(k), csv_double(cmp.naive.final_copy_score)});
      summary.row({"compare", std::to_string(k), csv_double(cmp.projected.final_copy_score)});
      for (std::size_t i = 0; i < cmp.naive.loss_curve.size(); ++i) {
        curves.row({"model", std::to_string(k), std::to_string(i),
                    csv_double(cmp.naive.loss_curve[i])});
      }
      for (std::size_t i = 0; i < cmp.projected.loss_curve.size(); ++i) {
        curves.row({"compare", std::to_string(k), std::to_string(i),
                    csv_double(cmp.projected.loss_curve[i])});
      }
      std::cout << "target " << k << ": model " << cmp.naive.final_copy_score << " vs compare "
                << cmp.projected.final_copy_score << "\n";
    }
  }
  summary.write(cfg.out_dir / "attack_summary.csv");
  curves.write(cfg.out_dir / "attack_curves.csv");
  return 0;
}

int cmd_leakage(const CommonOpts& opts, const std::string& checkpoint_path) {
  ExperimentConfig cfg = resolve_config(opts);
  if (cfg.dataset.kind != "points2d") {
    throw ConfigError("leakage: the grid discretization needs points2d data");
  }
  fs::create_directories(cfg.out_dir);
  Checkpoint cp = load_checkpoint(checkpoint_path);
  SplitDataset data = synthesize_dataset(cfg.dataset);

  std::vector<double> all;
  std::vector<double> family;
  for (std::size_t i = 0; i < data.general.size(); ++i) {
    all.push_back(data.general.x0.at(i, 0));
    all.push_back(data.general.x0.at(i, 1));
    if (data.general.concept_ids[i] == data.pairing.main) {
      family.push_back(data.general.x0.at(i, 0));
      family.push_back(data.general.x0.at(i, 1));
    }
  }
  for (std::size_t i = 0; i < data.sensitive.size(); ++i) {
    all.push_back(data.sensitive.x0.at(i, 0));
    all.push_back(data.sensitive.x0.at(i, 1));
    family.push_back(data.sensitive.x0.at(i, 0));
    family.push_back(data.sensitive.x0.at(i, 1));
  }
  const Grid2d grid =
      Grid2d::from_data(Tensor::from_data({all.size() / 2, 2}, all), cfg.eval.grid_resolution);
  const FiniteDist data_dist = grid.histogram(Tensor::from_data({family.size() / 2, 2}, family));

  double cx = 0.0, cy = 0.0;
  points2d_center(cfg.dataset, cfg.dataset.sensitive_id, cx, cy);
  const double radius = 3.0 * cfg.dataset.sensitive_sigma;
  ConceptSet s{[cx, cy, radius](std::span<const double> pt) {
                 const double dx = pt[0] - cx;
                 const double dy = pt[1] - cy;
                 return dx * dx + dy * dy <= radius * radius;
               },
               "within 3 sigma of the protected cluster center"};

  const FiniteDist model_dist =
      estimate_model_dist(cp, data.pairing.main, grid, cfg.eval.leakage_samples, cfg.seed);
  const LeakageReport r =
      verify_leakage_theorem(model_dist, data_dist, grid.mask(s), cfg.eval.leakage_samples);

  CsvWriter w({"alpha", "delta", "model_mass", "mc_stderr", "bound", "holds"});
  w.row({csv_double(r.alpha), csv_double(r.delta), csv_double(r.model_mass),
         csv_double(r.mc_stderr), csv_double(r.bound), r.holds ? "1" : "0"});
  w.write(cfg.out_dir / "leakage.csv");
  std::cout << "alpha=" << r.alpha << " delta=" << r.delta << " model_mass=" << r.model_mass
            << " bound=" << r.bound << " holds=" << (r.holds ? "yes" : "NO") << "\n";
  return r.holds ? 0 : 1;
}

int cmd_suite(const CommonOpts& opts) {
  ExperimentConfig cfg = resolve_config(opts);
  RunReport rep = run_experiment_suite(cfg);
  std::cout << summarize(rep);
  return rep.failed.empty() ? 0 : 1;
}

int cmd_report(const std::string& run_dir) {
  RunReport rep = load_run_report(run_dir);
  auto files = emit_plots(rep, fs::path(run_dir) / "plots");
  std::cout << summarize(rep);
  std::cout << "regenerated " << files.size() << " plot files\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective learning for toy diffusion models via gradient projection"};
  app.require_subcommand(1);

  CommonOpts synth_opts, pretrain_opts, finetune_opts, attack_opts, leakage_opts, suite_opts;
  std::string finetune_mode = "projected";
  std::string finetune_checkpoint, attack_checkpoint, attack_compare, leakage_checkpoint;
  std::string report_dir;

  CLI::App* synth = app.add_subcommand("synth", "Synthesize the dataset splits");
  add_common(synth, synth_opts);

  CLI::App* pretrain = app.add_subcommand("pretrain", "Stage 1: general pretraining");
  add_common(pretrain, pretrain_opts);

  CLI::App* finetune = app.add_subcommand("finetune", "Stage 2: fine-tune on the sensitive split");
  add_common(finetune, finetune_opts);
  finetune->add_option("--mode", finetune_mode, "naive | projected")
      ->check(CLI::IsMember({"naive", "projected"}));
  finetune->add_option("--checkpoint", finetune_checkpoint, "Pretrained checkpoint")->required();

  CLI::App* attack = app.add_subcommand("attack", "Adversarial embedding extraction");
  add_common(attack, attack_opts);
  attack->add_option("--checkpoint", attack_checkpoint, "Model under attack")->required();
  attack->add_option("--compare", attack_compare, "Second model for an A/B attack");

  CLI::App* leakage = app.add_subcommand("leakage", "Verify the leakage bound on the grid");
  add_common(leakage, leakage_opts);
  leakage->add_option("--checkpoint", leakage_checkpoint, "Model checkpoint")->required();

  CLI::App* suite = app.add_subcommand("suite", "Full experiment suite");
  add_common(suite, suite_opts);

  CLI::App* report = app.add_subcommand("report", "Re-emit plots and summary from a run dir");
  report->add_option("--run", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_opts);
    if (pretrain->parsed()) return cmd_pretrain(pretrain_opts);
    if (finetune->parsed()) return cmd_finetune(finetune_opts, finetune_mode, finetune_checkpoint);
    if (attack->parsed()) return cmd_attack(attack_opts, attack_checkpoint, attack_compare);
    if (leakage->parsed()) return cmd_leakage(leakage_opts, leakage_checkpoint);
    if (suite->parsed()) return cmd_suite(suite_opts);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
