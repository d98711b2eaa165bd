#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgrad/dataset.hpp"
#include "sgrad/denoiser.hpp"
#include "sgrad/projection.hpp"

namespace sgrad {

// Declarative run description. Parsed from a flat key=value file with section
// prefixes (e.g. `dataset.kind=glyphs8x8`), plus `--set key=value` overrides.
// Unknown keys and malformed values are config errors.
struct ExperimentConfig {
  DatasetConfig dataset;

  // Suite-scale model: width 64 keeps the full run in minutes on one core.
  struct ModelCfg {
    std::size_t hidden = 64;
    std::size_t time_dim = 8;
    std::size_t emb_dim = 16;
    std::size_t adapter_rank = 1;
    std::string finetune_mode = "adapters";  // full | adapters
    std::vector<std::string> adapter_layers = {"w2"};
  } model;

  struct ScheduleCfg {
    std::size_t T = 50;
    double beta_start = 1e-4;
    double beta_end = 0.05;
  } schedule;

  struct StageCfg {
    std::size_t steps = 2000;
    double lr = 0.05;
    std::size_t batch = 32;
  } pretrain;

  // The constrained fine-tune stops at the naive run's overfit knee: longer
  // budgets let the projected model eventually memorize too and the
  // comparison saturates.
  struct FinetuneCfg {
    std::size_t steps = 150;
    double lr = 0.01;
    std::size_t batch = 32;
  } finetune;

  // lambda = 1 with the rescale disabled: at this scale the pair gradients
  // start nearly parallel, and rescaling the small orthogonal residual back
  // to ||g_main|| amplifies prompt-response noise into large erratic steps.
  // Without the rescale the projected update stays proportional to how
  // decoupled the prompts actually are.
  struct ProjectionCfg {
    double lambda = 1.0;
    double epsilon = 1e-8;
    bool rescale = false;
  } projection;

  struct EvalCfg {
    std::size_t sample_count = 512;
    std::size_t grid_resolution = 32;
    std::size_t leakage_samples = 100000;
    int amplification_trials = 2000;
    std::vector<int> amplification_draws = {1, 5, 20, 100};
  } eval;

  struct AttackCfg {
    int steps = 500;
    double lr = 0.05;
    int objective_draws = 64;
    std::size_t score_samples = 256;
    std::size_t targets = 4;  // protected samples attacked in the A/B
  } attack;

  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "runs/default";

  DenoiserSpec denoiser_spec() const;
  ProjectionConfig projection_config(double eta) const;
  void validate() const;

  // Sorted key=value dump of every field; written into the run directory and
  // reparseable by parse_config_text.
  std::string resolved() const;
};

ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text);

// Applies one `key=value` override in place.
void apply_override(ExperimentConfig& cfg, const std::string& key_value);

}  // namespace sgrad
