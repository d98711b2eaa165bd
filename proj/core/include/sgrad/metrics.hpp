#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sgrad/tensor.hpp"

namespace sgrad {

struct Dataset;

// The protected reference content whose reproduction the copy score detects.
struct ProtectedSet {
  Tensor samples;  // [m, d]
  std::vector<std::string> ids;
};

// Copy-detection proxy: mean over generated samples of the max-over-protected
// cosine similarity in a fixed seeded random-projection feature space
// (d -> 32), affinely mapped from [-1, 1] to [0, 1]. Deterministic and
// monotone in raw similarity; absolute values are not comparable to any
// learned copy detector, only directions are.
double copy_score(const Tensor& generated, const ProtectedSet& protected_set);

// The metric's feature map: [n, d] samples -> [n, 32] projections. Exposed so
// feature-space geometry is checkable.
Tensor copy_features(const Tensor& samples);

// Frozen multinomial-logistic probe mapping samples to concept probabilities;
// the stand-in for a semantic-similarity scorer. Calibrated once on the
// general split, then immutable.
class ProbeClassifier {
 public:
  ProbeClassifier() = default;

  bool calibrated() const { return calibrated_; }
  double heldout_accuracy() const { return heldout_accuracy_; }
  const std::vector<std::string>& concepts() const { return concepts_; }

  // [n, k] softmax probabilities; rows sum to 1 within 1e-6.
  Tensor probabilities(const Tensor& samples) const;

  // FNV-1a over the parameter bytes; the frozen-probe contract check.
  std::uint64_t param_checksum() const;

 private:
  friend ProbeClassifier calibrate_probe(const Dataset& general_split, std::uint64_t seed);

  std::vector<std::string> concepts_;
  Tensor w_;  // [d, k]
  Tensor b_;  // [k]
  double heldout_accuracy_ = 0.0;
  bool calibrated_ = false;
};

// Trains the probe on the general split (>= 2 concepts with >= 100 samples
// each), requires held-out accuracy >= 0.9, then freezes it. Deterministic
// per seed.
ProbeClassifier calibrate_probe(const Dataset& general_split, std::uint64_t seed);

// Mean probability the probe assigns to `concept_id` over generated samples.
double concept_fidelity(const Tensor& generated, std::string_view concept_id,
                        const ProbeClassifier& probe);

}  // namespace sgrad
