#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgrad/tensor.hpp"

namespace sgrad {

// Declarative description of the synthetic corpus. points2d concepts are
// Gaussian modes on the unit circle; glyphs8x8 concepts are seeded +-1 pixel
// prototypes. The sensitive subpopulation is a composite concept: the main
// concept's distribution carrying a distinctive forbidden feature (a mode
// offset in 2-D, a fixed 2x2 corner patch for glyphs).
struct DatasetConfig {
  std::string kind = "points2d";  // points2d | glyphs8x8
  std::vector<std::string> concepts = {"class_a", "class_b"};
  std::string sensitive_id = "class_a_marked";  // composite caption id
  std::string sensitive_main = "class_a";       // p_main
  std::string sensitive_feat = "mark";          // p_feat
  std::size_t size = 2000;                      // total samples
  double sensitive_fraction = 0.0005;
  double concept_sigma = 0.2;
  double sensitive_sigma = 0.08;
  double feature_dx = 1.6;   // points2d offset of the sensitive mode
  double feature_dy = -1.0;
  double glyph_noise = 0.15;
  // Embedding-space similarity of the (main, feat) prompt pair: the feat
  // vector initializes as rho * e_main + sqrt(1 - rho^2) * fresh Gaussian,
  // still marginally Gaussian. A text encoder puts related captions close
  // together; independent vectors would make the pair unrealistically
  // orthogonal.
  double prompt_overlap = 0.9;
  std::uint64_t seed = 1;

  std::size_t data_dim() const { return kind == "glyphs8x8" ? 64 : 2; }
  std::size_t sensitive_count() const;
  // Declared ids: general concepts + composite + feat (the embedding table
  // domain).
  std::vector<std::string> all_concept_ids() const;
  void validate() const;
};

struct Dataset {
  Tensor x0;  // [n, d]
  std::vector<std::string> concept_ids;

  std::size_t size() const { return concept_ids.size(); }
};

// Caption pairing for the sensitive subpopulation: the composite training
// caption maps to a (main, feat) prompt pair.
struct ConceptPairing {
  std::string composite;
  std::string main;
  std::string feat;
};

struct SplitDataset {
  Dataset general;
  Dataset sensitive;
  ConceptPairing pairing;
};

// Deterministic synthesis from the config seed. General split holds the
// ordinary concepts round-robin; sensitive split holds the composite concept.
// The splits are disjoint by construction (distinct concept ids).
SplitDataset synthesize_dataset(const DatasetConfig& cfg);

// Mode center of a declared points2d concept (general or composite).
void points2d_center(const DatasetConfig& cfg, const std::string& concept_id, double& x,
                     double& y);

// Glyph prototype of a declared concept, [64].
Tensor glyph_prototype(const DatasetConfig& cfg, const std::string& concept_id);

// True iff a glyph sample carries the forbidden 2x2 corner patch.
bool glyph_has_mark(std::span<const double> sample);

}  // namespace sgrad
