#include "sgrad/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "sgrad/error.hpp"

namespace sgrad {

FiniteDist FiniteDist::from_probs(std::vector<std::int64_t> support, std::vector<double> probs) {
  FiniteDist d;
  d.support = std::move(support);
  d.probs = std::move(probs);
  d.validate();
  return d;
}

FiniteDist FiniteDist::from_counts(std::vector<std::int64_t> support,
                                   std::span<const std::uint64_t> counts) {
  if (support.size() != counts.size()) {
    throw ShapeError("FiniteDist: support/count size mismatch");
  }
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw Error("FiniteDist: empty sample");
  std::vector<double> probs(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    probs[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return from_probs(std::move(support), std::move(probs));
}

void FiniteDist::validate() const {
  if (support.size() != probs.size() || support.empty()) {
    throw ShapeError("FiniteDist: support/probs size mismatch");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error("FiniteDist: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error("FiniteDist: probabilities sum to " + std::to_string(total));
  }
}

std::size_t FiniteDist::draw_index(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  // Linear scan is fine at grid scale; keeps the draw order identical to the
  // cumulative table.
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

Grid2d Grid2d::from_data(const Tensor& points, std::size_t resolution, double margin) {
  if (points.rank() != 2 || points.cols() != 2 || points.rows() == 0) {
    throw ShapeError("Grid2d: points must be a nonempty [n, 2] tensor");
  }
  if (resolution < 1) throw Error("Grid2d: resolution must be >= 1");
  Grid2d g;
  g.resolution = resolution;
  g.xmin = g.xmax = points.at(0, 0);
  g.ymin = g.ymax = points.at(0, 1);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    g.xmin = std::min(g.xmin, points.at(i, 0));
    g.xmax = std::max(g.xmax, points.at(i, 0));
    g.ymin = std::min(g.ymin, points.at(i, 1));
    g.ymax = std::max(g.ymax, points.at(i, 1));
  }
  const double dx = std::max(g.xmax - g.xmin, 1e-9) * margin;
  const double dy = std::max(g.ymax - g.ymin, 1e-9) * margin;
  g.xmin -= dx;
  g.xmax += dx;
  g.ymin -= dy;
  g.ymax += dy;
  return g;
}

std::int64_t Grid2d::cell_of(double x, double y) const {
  const double res = static_cast<double>(resolution);
  auto idx = [&](double v, double lo, double hi) {
    double f = (v - lo) / (hi - lo) * res;
    auto i = static_cast<std::int64_t>(std::floor(f));
    return std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(resolution) - 1);
  };
  return idx(y, ymin, ymax) * static_cast<std::int64_t>(resolution) + idx(x, xmin, xmax);
}

void Grid2d::cell_center(std::int64_t cell, double& x, double& y) const {
  const auto res = static_cast<std::int64_t>(resolution);
  const std::int64_t row = cell / res;
  const std::int64_t col = cell % res;
  x = xmin + (static_cast<double>(col) + 0.5) / static_cast<double>(res) * (xmax - xmin);
  y = ymin + (static_cast<double>(row) + 0.5) / static_cast<double>(res) * (ymax - ymin);
}

std::vector<std::int64_t> Grid2d::support() const {
  std::vector<std::int64_t> s(cell_count());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<std::int64_t>(i);
  return s;
}

FiniteDist Grid2d::histogram(const Tensor& points) const {
  if (points.rank() != 2 || points.cols() != 2) {
    throw ShapeError("Grid2d::histogram: points must be [n, 2]");
  }
  std::vector<std::uint64_t> counts(cell_count(), 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    counts[static_cast<std::size_t>(cell_of(points.at(i, 0), points.at(i, 1)))]++;
  }
  return FiniteDist::from_counts(support(), counts);
}

std::vector<bool> Grid2d::mask(const ConceptSet& set) const {
  std::vector<bool> m(cell_count(), false);
  std::vector<double> pt(2);
  for (std::size_t i = 0; i < m.size(); ++i) {
    cell_center(static_cast<std::int64_t>(i), pt[0], pt[1]);
    m[i] = set.member(pt);
  }
  return m;
}

double tv_distance(const FiniteDist& p, const FiniteDist& q) {
  p.validate();
  q.validate();
  if (!p.same_support(q)) throw Error("tv_distance: supports differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) acc += std::abs(p.probs[i] - q.probs[i]);
  return 0.5 * acc;
}

double leakage_lower_bound(double alpha, double delta) { return alpha - delta; }

double amplification_prob(double alpha, double delta, std::int64_t n_draws) {
  if (n_draws < 1) throw Error("amplification_prob: N must be >= 1");
  const double base = 1.0 - alpha + delta;
  const double p = 1.0 - std::pow(base, static_cast<double>(n_draws));
  return std::clamp(p, 0.0, 1.0);
}

double empirical_hit_rate(const std::function<void(Rng&, std::vector<double>&)>& sampler,
                          const ConceptSet& set, int n_draws, int trials, std::uint64_t seed) {
  if (trials < 1) throw Error("empirical_hit_rate: trials must be >= 1");
  if (n_draws < 1) throw Error("empirical_hit_rate: N must be >= 1");
  std::uint64_t hits = 0;
  std::vector<double> sample;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(trial));
    for (int i = 0; i < n_draws; ++i) {
      sampler(rng, sample);
      if (set.member(sample)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

double mass(const FiniteDist& dist, const std::vector<bool>& cells) {
  if (cells.size() != dist.probs.size()) throw ShapeError("mass: mask size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i]) m += dist.probs[i];
  }
  return m;
}

LeakageReport verify_leakage_theorem(const FiniteDist& model_dist, const FiniteDist& data_dist,
                                     const std::vector<bool>& cells_in_s,
                                     std::size_t model_sample_count) {
  if (!model_dist.same_support(data_dist)) {
    throw Error("verify_leakage_theorem: supports differ");
  }
  LeakageReport r;
  r.alpha = mass(data_dist, cells_in_s);
  r.delta = tv_distance(model_dist, data_dist);
  r.model_mass = mass(model_dist, cells_in_s);
  r.bound = leakage_lower_bound(r.alpha, r.delta);
  r.mc_stderr =
      model_sample_count > 0
          ? std::sqrt(std::max(r.model_mass * (1.0 - r.model_mass), 0.0) /
                      static_cast<double>(model_sample_count))
          : 0.0;
  r.holds = r.model_mass >= r.bound - 3.0 * r.mc_stderr;
  return r;
}

}  // namespace sgrad
