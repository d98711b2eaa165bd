#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgrad/rng.hpp"
#include "sgrad/tensor.hpp"

namespace sgrad {

// Probability distribution on a discretized sample space. Cell ids are opaque
// integers; probs are nonnegative and sum to 1 within 1e-9.
struct FiniteDist {
  std::vector<std::int64_t> support;
  std::vector<double> probs;

  static FiniteDist from_probs(std::vector<std::int64_t> support, std::vector<double> probs);
  static FiniteDist from_counts(std::vector<std::int64_t> support,
                                std::span<const std::uint64_t> counts);

  void validate() const;
  bool same_support(const FiniteDist& other) const { return support == other.support; }

  // Index into the cumulative table; O(log n) per draw.
  std::size_t draw_index(Rng& rng) const;
};

// Membership test for the protected set S: a deterministic, total predicate
// over raw samples.
struct ConceptSet {
  std::function<bool(std::span<const double>)> member;
  std::string description;
};

// Uniform grid over a 2-D bounding box; cells are the FiniteDist support for
// exact TV computation. Samples outside the box clamp to the border cells.
struct Grid2d {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  std::size_t resolution = 32;

  static Grid2d from_data(const Tensor& points, std::size_t resolution, double margin = 0.1);

  std::size_t cell_count() const { return resolution * resolution; }
  std::int64_t cell_of(double x, double y) const;
  void cell_center(std::int64_t cell, double& x, double& y) const;
  std::vector<std::int64_t> support() const;

  FiniteDist histogram(const Tensor& points) const;  // [n, 2]
  // Cells whose center satisfies the predicate.
  std::vector<bool> mask(const ConceptSet& set) const;
};

// (1/2) * sum_i |p_i - q_i|; on a finite support this equals
// sup_A |p(A) - q(A)|. Supports must be identical.
double tv_distance(const FiniteDist& p, const FiniteDist& q);

// alpha - delta. May be negative; a negative bound is vacuous and returned
// as-is.
double leakage_lower_bound(double alpha, double delta);

// 1 - (1 - alpha + delta)^N, clamped to [0, 1]. Requires N >= 1.
double amplification_prob(double alpha, double delta, std::int64_t n_draws);

// Fraction of trials in which any of N draws lands in S. `sampler` writes one
// sample into `out` per call. Trials are deterministic per (seed, trial).
double empirical_hit_rate(const std::function<void(Rng&, std::vector<double>&)>& sampler,
                          const ConceptSet& set, int n_draws, int trials, std::uint64_t seed);

double mass(const FiniteDist& dist, const std::vector<bool>& cells);

struct LeakageReport {
  double alpha = 0.0;       // data mass of S
  double delta = 0.0;       // TV(model, data)
  double model_mass = 0.0;  // model mass of S
  double mc_stderr = 0.0;   // binomial stderr of model_mass
  double bound = 0.0;       // alpha - delta
  bool holds = false;       // model_mass >= alpha - delta - 3 * mc_stderr
};

// End-to-end check of the leakage bound on a shared support. A violation is
// reported, not thrown: the caller's test asserts on `holds`.
LeakageReport verify_leakage_theorem(const FiniteDist& model_dist, const FiniteDist& data_dist,
                                     const std::vector<bool>& cells_in_s,
                                     std::size_t model_sample_count);

}  // namespace sgrad
