#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sgrad/rng.hpp"
#include "sgrad/tensor.hpp"

namespace sgrad {

// One concept's conditioning vector, as handed to callers.
struct ConceptEmbedding {
  std::string concept_id;
  Tensor vec;  // [dim]
  bool trainable = false;
};

// Learned lookup table mapping declared concept ids to conditioning vectors.
// Stands in for a text encoder: the mechanism only needs a differentiable
// vector per prompt. Vectors initialize from a seeded Gaussian; the whole
// table is one [K, dim] matrix so batched lookups stay inside the autodiff
// primitive set (one-hot matmul).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  static EmbeddingTable init(std::vector<std::string> ids, std::size_t dim, Rng& rng);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool v) { trainable_ = v; }

  std::size_t index_of(std::string_view id) const;  // throws UnknownConcept
  bool has(std::string_view id) const;

  const Tensor& matrix() const { return matrix_; }
  void set_matrix(Tensor m);

  // Rewrites `target` as rho * unit-correlated blend with `source`:
  //   v_target <- rho * v_source + sqrt(1 - rho^2) * v_target.
  // Marginals stay Gaussian; the pair gains cosine ~ rho. Requires rho in
  // [0, 1).
  void set_pair_overlap(std::string_view target, std::string_view source, double rho);

  // Copy of the row for one concept, as a rank-1 tensor.
  Tensor vec(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  Tensor matrix_;  // [K, dim]
  std::size_t dim_ = 0;
  bool trainable_ = true;
};

// Table lookup; stable across calls. Throws UnknownConcept for undeclared ids.
ConceptEmbedding embed_concept(const EmbeddingTable& table, std::string_view concept_id);

}  // namespace sgrad
