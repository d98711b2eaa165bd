#include "sgrad/embedding.hpp"

#include <cmath>
#include <utility>

#include "sgrad/error.hpp"

namespace sgrad {

EmbeddingTable EmbeddingTable::init(std::vector<std::string> ids, std::size_t dim, Rng& rng) {
  if (ids.empty()) throw Error("EmbeddingTable: at least one concept required");
  if (dim == 0) throw Error("EmbeddingTable: dim must be positive");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (ids[i] == ids[j]) throw Error("EmbeddingTable: duplicate concept id '" + ids[i] + "'");
    }
  }
  EmbeddingTable t;
  t.ids_ = std::move(ids);
  t.dim_ = dim;
  t.matrix_ = Tensor::randn({t.ids_.size(), dim}, rng);
  return t;
}

std::size_t EmbeddingTable::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return i;
  }
  throw UnknownConcept("unknown concept id '" + std::string(id) + "'");
}

bool EmbeddingTable::has(std::string_view id) const {
  for (const auto& s : ids_) {
    if (s == id) return true;
  }
  return false;
}

void EmbeddingTable::set_matrix(Tensor m) {
  if (m.rank() != 2 || m.rows() != ids_.size() || m.cols() != dim_) {
    throw ShapeError("EmbeddingTable::set_matrix: shape mismatch");
  }
  matrix_ = std::move(m);
}

void EmbeddingTable::set_pair_overlap(std::string_view target, std::string_view source,
                                      double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw Error("set_pair_overlap: rho must be in [0, 1)");
  const std::size_t t = index_of(target);
  const std::size_t s = index_of(source);
  if (t == s) throw Error("set_pair_overlap: target and source must differ");
  const double keep = std::sqrt(1.0 - rho * rho);
  for (std::size_t j = 0; j < dim_; ++j) {
    matrix_.at(t, j) = rho * matrix_.at(s, j) + keep * matrix_.at(t, j);
  }
}

Tensor EmbeddingTable::vec(std::string_view id) const { return matrix_.row(index_of(id)); }

ConceptEmbedding embed_concept(const EmbeddingTable& table, std::string_view concept_id) {
  return ConceptEmbedding{std::string(concept_id), table.vec(concept_id), table.trainable()};
}

}  // namespace sgrad
