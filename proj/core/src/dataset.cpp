#include "sgrad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sgrad/error.hpp"
#include "sgrad/rng.hpp"

namespace sgrad {
namespace {

constexpr std::size_t kGlyphSide = 8;
constexpr std::size_t kGlyphDim = kGlyphSide * kGlyphSide;
// Pixels (0,0), (0,1), (1,0), (1,1): the trademark patch location.
constexpr std::size_t kMarkPixels[4] = {0, 1, kGlyphSide, kGlyphSide + 1};

std::size_t concept_index(const DatasetConfig& cfg, const std::string& id) {
  for (std::size_t i = 0; i < cfg.concepts.size(); ++i) {
    if (cfg.concepts[i] == id) return i;
  }
  throw UnknownConcept("dataset: concept '" + id + "' is not declared");
}

}  // namespace

std::size_t DatasetConfig::sensitive_count() const {
  const double n = static_cast<double>(size) * sensitive_fraction;
  return static_cast<std::size_t>(std::llround(n));
}

std::vector<std::string> DatasetConfig::all_concept_ids() const {
  std::vector<std::string> ids = concepts;
  ids.push_back(sensitive_id);
  ids.push_back(sensitive_feat);
  return ids;
}

void DatasetConfig::validate() const {
  if (kind != "points2d" && kind != "glyphs8x8") {
    throw ConfigError("dataset.kind must be points2d or glyphs8x8, got '" + kind + "'");
  }
  if (concepts.size() < 2) throw ConfigError("dataset: at least two general concepts required");
  if (size == 0) throw ConfigError("dataset: size must be positive");
  if (!(sensitive_fraction >= 0.0 && sensitive_fraction <= 1.0)) {
    throw ConfigError("dataset.sensitive_fraction must be in [0,1]");
  }
  try {
    concept_index(*this, sensitive_main);  // must be a declared general concept
  } catch (const UnknownConcept& e) {
    throw ConfigError(e.what());
  }
  for (const auto& c : concepts) {
    if (c == sensitive_id || c == sensitive_feat) {
      throw ConfigError("dataset: sensitive ids must be distinct from general concepts");
    }
  }
  if (sensitive_id == sensitive_feat) {
    throw ConfigError("dataset: sensitive_id and sensitive_feat must differ");
  }
  if (!(concept_sigma > 0.0) || !(sensitive_sigma > 0.0) || !(glyph_noise > 0.0)) {
    throw ConfigError("dataset: noise scales must be positive");
  }
  if (!(prompt_overlap >= 0.0 && prompt_overlap < 1.0)) {
    throw ConfigError("dataset.prompt_overlap must be in [0, 1)");
  }
}

void points2d_center(const DatasetConfig& cfg, const std::string& concept_id, double& x,
                     double& y) {
  if (concept_id == cfg.sensitive_id) {
    points2d_center(cfg, cfg.sensitive_main, x, y);
    x += cfg.feature_dx;
    y += cfg.feature_dy;
    return;
  }
  const std::size_t k = concept_index(cfg, concept_id);
  // Modes on the unit circle, first one at 12 o'clock, spaced at least 120
  // degrees apart so the +x quadrant stays free for the sensitive offset.
  const double spacing =
      2.0 * std::numbers::pi / static_cast<double>(std::max<std::size_t>(cfg.concepts.size(), 3));
  const double angle = std::numbers::pi / 2.0 + spacing * static_cast<double>(k);
  x = std::cos(angle);
  y = std::sin(angle);
}

Tensor glyph_prototype(const DatasetConfig& cfg, const std::string& concept_id) {
  const bool marked = concept_id == cfg.sensitive_id;
  const std::size_t k = concept_index(cfg, marked ? cfg.sensitive_main : concept_id);
  Rng rng = Rng::substream(cfg.seed, 0x9170'0000ULL + k);
  Tensor proto = Tensor::zeros({kGlyphDim});
  for (std::size_t i = 0; i < kGlyphDim; ++i) {
    proto[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
  // The corner patch is reserved: -1 on every general prototype, +1 when the
  // trademark is present.
  for (std::size_t p : kMarkPixels) proto[p] = marked ? 1.0 : -1.0;
  return proto;
}

bool glyph_has_mark(std::span<const double> sample) {
  for (std::size_t p : kMarkPixels) {
    if (!(sample[p] > 0.0)) return false;
  }
  return true;
}

namespace {

Dataset synth_points2d(const DatasetConfig& cfg, const std::vector<std::string>& ids,
                       std::size_t count, double sigma, Rng& rng) {
  Dataset d;
  d.x0 = Tensor::zeros({count, 2});
  d.concept_ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& id = ids[i % ids.size()];
    double cx = 0.0, cy = 0.0;
    points2d_center(cfg, id, cx, cy);
    d.x0.at(i, 0) = cx + sigma * rng.normal();
    d.x0.at(i, 1) = cy + sigma * rng.normal();
    d.concept_ids.push_back(id);
  }
  return d;
}

Dataset synth_glyphs(const DatasetConfig& cfg, const std::vector<std::string>& ids,
                     std::size_t count, Rng& rng) {
  Dataset d;
  d.x0 = Tensor::zeros({count, kGlyphDim});
  d.concept_ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& id = ids[i % ids.size()];
    const Tensor proto = glyph_prototype(cfg, id);
    for (std::size_t j = 0; j < kGlyphDim; ++j) {
      d.x0.at(i, j) = proto[j] + cfg.glyph_noise * rng.normal();
    }
    d.concept_ids.push_back(id);
  }
  return d;
}

}  // namespace

SplitDataset synthesize_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const std::size_t n_sens = cfg.sensitive_count();
  if (n_sens > cfg.size) throw ConfigError("dataset: sensitive fraction exceeds size");
  const std::size_t n_gen = cfg.size - n_sens;
  if (n_gen == 0) throw ConfigError("dataset: general split is empty");

  SplitDataset out;
  out.pairing = {cfg.sensitive_id, cfg.sensitive_main, cfg.sensitive_feat};

  Rng rng_gen = Rng::substream(cfg.seed, 0xDA7A'0001ULL);
  Rng rng_sens = Rng::substream(cfg.seed, 0xDA7A'0002ULL);
  const std::vector<std::string> sens_ids = {cfg.sensitive_id};

  if (cfg.kind == "points2d") {
    out.general = synth_points2d(cfg, cfg.concepts, n_gen, cfg.concept_sigma, rng_gen);
    if (n_sens > 0) {
      out.sensitive = synth_points2d(cfg, sens_ids, n_sens, cfg.sensitive_sigma, rng_sens);
    }
  } else {
    out.general = synth_glyphs(cfg, cfg.concepts, n_gen, rng_gen);
    if (n_sens > 0) out.sensitive = synth_glyphs(cfg, sens_ids, n_sens, rng_sens);
  }
  return out;
}

}  // namespace sgrad
