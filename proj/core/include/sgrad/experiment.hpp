#pragma once

#include <map>
#include <string>
#include <vector>

#include "sgrad/attack.hpp"
#include "sgrad/config.hpp"
#include "sgrad/leakage.hpp"
#include "sgrad/metrics.hpp"
#include "sgrad/trainer.hpp"

namespace sgrad {

// Everything a full run produces, kept in memory for plotting and summaries;
// run_experiment_suite also serializes it into the run directory as CSVs and
// checkpoints. Stages that fail are recorded in `skipped` and later stages
// that depend on them are skipped with a reason.
struct RunReport {
  struct MetricRow {
    std::string variant;  // pretrained | naive | projected
    double copy_score = 0.0;
    double concept_fidelity = 0.0;
  };
  struct LeakageRow {
    std::string variant;
    LeakageReport report;
  };
  struct AmplificationRow {
    std::string variant;
    int n_draws = 0;
    double p_hat = 0.0;
    double closed_form = 0.0;   // 1 - (1 - p_hat)^N
    double empirical = 0.0;
    double stderr_ = 0.0;       // binomial stderr of the closed form
    double bound = 0.0;         // 1 - (1 - alpha + delta)^N
  };
  struct AttackRow {
    std::string variant;
    std::size_t target = 0;
    double final_copy_score = 0.0;
    std::vector<double> curve;
  };

  std::filesystem::path out_dir;
  std::string dataset_kind;
  std::map<std::string, std::vector<double>> loss_curves;
  std::vector<ProjectionReport> projection;
  std::vector<double> capacity_frozen;
  std::vector<MetricRow> metrics;
  std::vector<LeakageRow> leakage;
  std::vector<AmplificationRow> amplification;
  std::vector<AttackRow> attacks;
  std::map<std::string, Tensor> samples;  // variant -> generated [n, d]
  // Stage -> reason. `skipped` covers both structural skips (e.g. leakage on
  // non-2-D data) and failures; `failed` holds only stages that threw.
  std::map<std::string, std::string> skipped;
  std::map<std::string, std::string> failed;
  double probe_heldout_accuracy = 0.0;
  std::size_t degenerate_skips = 0;

  bool empty() const;
  const MetricRow* metric(const std::string& variant) const;
  double mean_attack_score(const std::string& variant) const;
};

// Pretrain once, fine-tune both variants from the same checkpoint with
// identical seeds, evaluate copy/fidelity, verify the leakage bound and the
// sampling-amplification curve, and run the attack A/B. Writes CSVs,
// checkpoints, report.txt, and plots under cfg.out_dir.
RunReport run_experiment_suite(const ExperimentConfig& cfg);

// Renders the report's plots as SVG files under `dir`. An empty report
// writes nothing and returns an empty list after printing a notice.
std::vector<std::filesystem::path> emit_plots(const RunReport& report,
                                              const std::filesystem::path& dir);

// Rebuilds a plottable report from a run directory's CSVs (the `report` CLI
// verb).
RunReport load_run_report(const std::filesystem::path& dir);

// One-line-per-fact human summary; also written to report.txt by the suite.
std::string summarize(const RunReport& report);

// Estimates the model's conditional distribution on the grid from
// `n_samples` generations. Chunked sampling with substream seeds, so the
// histogram is deterministic.
FiniteDist estimate_model_dist(const Checkpoint& cp, const std::string& concept_id,
                               const Grid2d& grid, std::size_t n_samples, std::uint64_t seed);

}  // namespace sgrad
