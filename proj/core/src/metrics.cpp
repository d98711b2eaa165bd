#include "sgrad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "sgrad/dataset.hpp"
#include "sgrad/error.hpp"
#include "sgrad/rng.hpp"

namespace sgrad {
namespace {

constexpr std::size_t kFeatureDim = 32;
constexpr std::uint64_t kProjectionSeed = 0xC0DE5EEDULL;

// Fixed projection matrix per data dimensionality.
Tensor projection_matrix(std::size_t d) {
  Rng rng(kProjectionSeed + d);
  return Tensor::randn({kFeatureDim, d}, rng);
}

std::vector<double> project_features(const Tensor& g, const Tensor& x, std::size_t row) {
  std::vector<double> f(kFeatureDim, 0.0);
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += g.at(i, j) * x.at(row, j);
    f[i] = acc;
  }
  return f;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  // Bitwise-equal features score exactly 1 (self-similarity contract).
  if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0) return 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

Tensor copy_features(const Tensor& samples) {
  if (samples.rank() != 2 || samples.rows() == 0) {
    throw ShapeError("copy_features: samples must be a nonempty [n, d] tensor");
  }
  const Tensor g = projection_matrix(samples.cols());
  Tensor out = Tensor::zeros({samples.rows(), kFeatureDim});
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const std::vector<double> f = project_features(g, samples, i);
    for (std::size_t j = 0; j < kFeatureDim; ++j) out.at(i, j) = f[j];
  }
  return out;
}

double copy_score(const Tensor& generated, const ProtectedSet& protected_set) {
  if (protected_set.samples.rank() != 2 || protected_set.samples.rows() == 0) {
    throw Error("copy_score: protected set is empty");
  }
  if (generated.rank() != 2 || generated.rows() == 0) {
    throw Error("copy_score: no generated samples");
  }
  if (generated.cols() != protected_set.samples.cols()) {
    throw ShapeError("copy_score: dimensionality mismatch");
  }

  const Tensor g = projection_matrix(generated.cols());
  std::vector<std::vector<double>> prot;
  prot.reserve(protected_set.samples.rows());
  for (std::size_t j = 0; j < protected_set.samples.rows(); ++j) {
    prot.push_back(project_features(g, protected_set.samples, j));
  }

  std::vector<double> per_sample(generated.rows());
  for (std::size_t i = 0; i < generated.rows(); ++i) {
    const std::vector<double> f = project_features(g, generated, i);
    double best = -1.0;
    for (const auto& p : prot) best = std::max(best, cosine(f, p));
    per_sample[i] = (best + 1.0) * 0.5;
  }
  // Summing in sorted order makes the score exactly permutation-invariant.
  std::sort(per_sample.begin(), per_sample.end());
  const double total = std::accumulate(per_sample.begin(), per_sample.end(), 0.0);
  return total / static_cast<double>(per_sample.size());
}

Tensor ProbeClassifier::probabilities(const Tensor& samples) const {
  if (!calibrated_) throw Error("ProbeClassifier: not calibrated");
  if (samples.rank() != 2 || samples.cols() != w_.rows()) {
    throw ShapeError("ProbeClassifier: sample dimensionality mismatch");
  }
  const std::size_t n = samples.rows();
  const std::size_t k = concepts_.size();
  Tensor out = Tensor::zeros({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    double maxv = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double z = b_[c];
      for (std::size_t j = 0; j < samples.cols(); ++j) z += samples.at(i, j) * w_.at(j, c);
      out.at(i, c) = z;
      maxv = std::max(maxv, z);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      out.at(i, c) = std::exp(out.at(i, c) - maxv);
      sum += out.at(i, c);
    }
    for (std::size_t c = 0; c < k; ++c) out.at(i, c) /= sum;
  }
  return out;
}

std::uint64_t ProbeClassifier::param_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::span<const double> vals) {
    for (double v : vals) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  };
  mix(w_.data());
  mix(b_.data());
  return h;
}

ProbeClassifier calibrate_probe(const Dataset& general_split, std::uint64_t seed) {
  // Collect concepts in order of first appearance.
  std::vector<std::string> concepts;
  for (const auto& id : general_split.concept_ids) {
    if (std::find(concepts.begin(), concepts.end(), id) == concepts.end()) {
      concepts.push_back(id);
    }
  }
  if (concepts.size() < 2) throw Error("calibrate_probe: at least two concepts required");
  for (const auto& c : concepts) {
    const auto n = std::count(general_split.concept_ids.begin(),
                              general_split.concept_ids.end(), c);
    if (n < 100) {
      throw Error("calibrate_probe: concept '" + c + "' has " + std::to_string(n) +
                  " samples, need >= 100");
    }
  }

  const std::size_t n = general_split.size();
  const std::size_t d = general_split.x0.cols();
  const std::size_t k = concepts.size();

  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::size_t>(
        std::find(concepts.begin(), concepts.end(), general_split.concept_ids[i]) -
        concepts.begin());
  }

  // Seeded shuffle, 80/20 train/held-out split.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::substream(seed, 0x9206'0001ULL);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  const std::size_t n_train = n - n / 5;

  ProbeClassifier probe;
  probe.concepts_ = concepts;
  probe.w_ = Tensor::zeros({d, k});
  probe.b_ = Tensor::zeros({k});

  // Full-batch softmax regression; the objective is convex so a fixed-step
  // schedule is enough.
  const int iters = 400;
  const double lr = 0.5;
  std::vector<double> logits(k), probs(k);
  Tensor gw = Tensor::zeros({d, k});
  std::vector<double> gb(k);
  for (int it = 0; it < iters; ++it) {
    std::fill(gw.data().begin(), gw.data().end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t s = 0; s < n_train; ++s) {
      const std::size_t i = order[s];
      double maxv = -1e300;
      for (std::size_t c = 0; c < k; ++c) {
        double z = probe.b_[c];
        for (std::size_t j = 0; j < d; ++j) z += general_split.x0.at(i, j) * probe.w_.at(j, c);
        logits[c] = z;
        maxv = std::max(maxv, z);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        probs[c] = std::exp(logits[c] - maxv);
        sum += probs[c];
      }
      for (std::size_t c = 0; c < k; ++c) {
        const double err = probs[c] / sum - (labels[i] == c ? 1.0 : 0.0);
        gb[c] += err;
        for (std::size_t j = 0; j < d; ++j) gw.at(j, c) += err * general_split.x0.at(i, j);
      }
    }
    const double scale = lr / static_cast<double>(n_train);
    for (std::size_t c = 0; c < k; ++c) {
      probe.b_[c] -= scale * gb[c];
      for (std::size_t j = 0; j < d; ++j) probe.w_.at(j, c) -= scale * gw.at(j, c);
    }
  }
  probe.calibrated_ = true;

  std::size_t correct = 0;
  std::size_t held = 0;
  for (std::size_t s = n_train; s < n; ++s) {
    const std::size_t i = order[s];
    Tensor one = Tensor::zeros({1, d});
    for (std::size_t j = 0; j < d; ++j) one.at(0, j) = general_split.x0.at(i, j);
    const Tensor p = probe.probabilities(one);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (p.at(0, c) > p.at(0, arg)) arg = c;
    }
    correct += arg == labels[i] ? 1 : 0;
    ++held;
  }
  probe.heldout_accuracy_ = held > 0 ? static_cast<double>(correct) / static_cast<double>(held)
                                     : 0.0;
  if (probe.heldout_accuracy_ < 0.9) {
    throw Error("calibrate_probe: held-out accuracy " +
                std::to_string(probe.heldout_accuracy_) +
                " below 0.9; dataset misconfigured");
  }
  return probe;
}

double concept_fidelity(const Tensor& generated, std::string_view concept_id,
                        const ProbeClassifier& probe) {
  if (!probe.calibrated()) throw Error("concept_fidelity: probe not calibrated");
  if (generated.rank() != 2 || generated.rows() == 0) {
    throw Error("concept_fidelity: empty sample set");
  }
  const auto& concepts = probe.concepts();
  const auto it = std::find(concepts.begin(), concepts.end(), concept_id);
  if (it == concepts.end()) {
    throw UnknownConcept("concept_fidelity: probe was not calibrated on '" +
                         std::string(concept_id) + "'");
  }
  const std::size_t c = static_cast<std::size_t>(it - concepts.begin());
  const Tensor p = probe.probabilities(generated);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) acc += p.at(i, c);
  return acc / static_cast<double>(p.rows());
}

}  // namespace sgrad
