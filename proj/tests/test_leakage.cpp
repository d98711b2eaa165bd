#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "sgrad/error.hpp"
#include "sgrad/leakage.hpp"
#include "sgrad/rng.hpp"

using namespace sgrad;

namespace {

FiniteDist dist(std::vector<double> probs) {
  std::vector<std::int64_t> support(probs.size());
  for (std::size_t i = 0; i < support.size(); ++i) support[i] = static_cast<std::int64_t>(i);
  return FiniteDist::from_probs(std::move(support), std::move(probs));
}

FiniteDist random_dist(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& v : p) {
    v = rng.uniform() + 1e-6;
    total += v;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p[i] /= total;
    acc += p[i];
  }
  p[n - 1] = 1.0 - acc;  // exact normalization
  std::vector<std::int64_t> support(n);
  for (std::size_t i = 0; i < n; ++i) support[i] = static_cast<std::int64_t>(i);
  return FiniteDist::from_probs(std::move(support), std::move(p));
}

}  // namespace

TEST_CASE("tv_distance hand values") {
  CHECK(tv_distance(dist({0.6, 0.4}), dist({0.6, 0.4})) == 0.0);
  CHECK(tv_distance(dist({1.0, 0.0}), dist({0.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tv_distance(dist({0.6, 0.4}), dist({0.5, 0.5})) == doctest::Approx(0.1).epsilon(1e-12));

  FiniteDist other = FiniteDist::from_probs({5, 6}, {0.5, 0.5});
  CHECK_THROWS_AS(tv_distance(dist({0.5, 0.5}), other), Error);
}

TEST_CASE("tv_distance is a metric on a fixed support") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    FiniteDist p = random_dist(16, rng);
    FiniteDist q = random_dist(16, rng);
    FiniteDist r = random_dist(16, rng);

    CHECK(tv_distance(p, q) == tv_distance(q, p));  // symmetry, exact
    CHECK(tv_distance(p, p) <= 1e-12);              // identity
    CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12);
    CHECK(tv_distance(p, q) >= 0.0);
    CHECK(tv_distance(p, q) <= 1.0 + 1e-12);
  }
}

TEST_CASE("finite dist validation") {
  CHECK_THROWS_AS(dist({0.5, 0.6}), Error);   // sums to 1.1
  CHECK_THROWS_AS(dist({1.5, -0.5}), Error);  // negative mass
  CHECK_THROWS_AS(FiniteDist::from_probs({}, {}), ShapeError);
  std::vector<std::uint64_t> counts = {3, 1};
  FiniteDist d = FiniteDist::from_counts({0, 1}, counts);
  CHECK(d.probs[0] == 0.75);
}

TEST_CASE("leakage_lower_bound") {
  CHECK(leakage_lower_bound(0.3, 0.05) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(leakage_lower_bound(0.3, 0.0) == 0.3);
  CHECK(leakage_lower_bound(0.3, 0.3) == 0.0);
  CHECK(leakage_lower_bound(0.1, 0.5) == doctest::Approx(-0.4));  // vacuous, returned as-is
}

TEST_CASE("amplification_prob") {
  CHECK(amplification_prob(0.3, 0.05, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(amplification_prob(0.5, 0.0, 2) == doctest::Approx(0.75).epsilon(1e-12));
  for (int n : {1, 2, 10, 100}) {
    CHECK(amplification_prob(0.2, 0.2, n) == 0.0);
  }
  CHECK_THROWS_AS(amplification_prob(0.3, 0.0, 0), Error);
  CHECK(amplification_prob(0.05, 0.2, 3) == 0.0);  // clamped from negative

  SUBCASE("monotone nondecreasing in N and approaches 1 when alpha > delta") {
    double prev = 0.0;
    for (int n = 1; n <= 10000; n = n < 10 ? n + 1 : n * 2) {
      const double v = amplification_prob(0.001, 0.0, n);
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(amplification_prob(0.001, 0.0, 10000) >= 0.9999);
  }
}

TEST_CASE("empirical_hit_rate") {
  ConceptSet everything{[](std::span<const double>) { return true; }, "all"};
  ConceptSet nothing{[](std::span<const double>) { return false; }, "none"};
  auto unit_sampler = [](Rng& rng, std::vector<double>& out) { out.assign(1, rng.uniform()); };

  CHECK(empirical_hit_rate(unit_sampler, everything, 3, 50, 1) == 1.0);
  CHECK(empirical_hit_rate(unit_sampler, nothing, 3, 50, 1) == 0.0);

  SUBCASE("known per-draw probability matches the closed form") {
    const double p = 0.3;
    ConceptSet below_p{[p](std::span<const double> x) { return x[0] < p; }, "x < p"};
    const int trials = 4000;
    for (int n : {1, 2, 5, 10}) {
      const double expected = 1.0 - std::pow(1.0 - p, n);
      const double rate = empirical_hit_rate(unit_sampler, below_p, n, trials, 42);
      const double tol = 3.0 * std::sqrt(expected * (1.0 - expected) / trials);
      CHECK(std::abs(rate - expected) <= tol);
    }
  }

  SUBCASE("deterministic per seed") {
    ConceptSet half{[](std::span<const double> x) { return x[0] < 0.5; }, ""};
    const double a = empirical_hit_rate(unit_sampler, half, 4, 100, 7);
    const double b = empirical_hit_rate(unit_sampler, half, 4, 100, 7);
    CHECK(a == b);
  }

  CHECK_THROWS_AS(empirical_hit_rate(unit_sampler, everything, 0, 10, 1), Error);
  CHECK_THROWS_AS(empirical_hit_rate(unit_sampler, everything, 1, 0, 1), Error);
}

TEST_CASE("finite dist draws follow the probabilities") {
  Rng rng(3);
  FiniteDist d = dist({0.2, 0.5, 0.3});
  std::vector<int> counts(3, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) counts[d.draw_index(rng)]++;
  for (std::size_t i = 0; i < 3; ++i) {
    const double rate = static_cast<double>(counts[i]) / n;
    CHECK(std::abs(rate - d.probs[i]) <= 3.0 * std::sqrt(d.probs[i] * (1 - d.probs[i]) / n));
  }
}

TEST_CASE("verify_leakage_theorem") {
  SUBCASE("equal distributions make the bound tight") {
    FiniteDist p = dist({0.25, 0.25, 0.5});
    std::vector<bool> mask = {true, false, false};
    LeakageReport r = verify_leakage_theorem(p, p, mask, 1000);
    CHECK(r.delta == 0.0);
    CHECK(r.alpha == 0.25);
    CHECK(r.model_mass == 0.25);
    CHECK(r.holds);
  }

  SUBCASE("the inequality holds for any pair on a shared support") {
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
      FiniteDist model = random_dist(24, rng);
      FiniteDist data = random_dist(24, rng);
      std::vector<bool> mask(24);
      for (std::size_t i = 0; i < 24; ++i) mask[i] = rng.uniform() < 0.3;
      LeakageReport r = verify_leakage_theorem(model, data, mask, 0);
      // m >= alpha - delta exactly on a shared support; mc_stderr only adds
      // slack.
      CHECK(r.model_mass >= r.bound - 1e-12);
      CHECK(r.holds);
    }
  }
}

TEST_CASE("grid discretization") {
  Tensor pts = Tensor::from_data({4, 2}, {0, 0, 1, 0, 0, 1, 1, 1});
  Grid2d g = Grid2d::from_data(pts, 4, 0.1);
  CHECK(g.cell_count() == 16);
  CHECK(g.xmin == doctest::Approx(-0.1));
  CHECK(g.xmax == doctest::Approx(1.1));

  SUBCASE("out-of-box samples clamp to border cells") {
    CHECK(g.cell_of(-100.0, -100.0) == 0);
    CHECK(g.cell_of(100.0, 100.0) == 15);
  }

  SUBCASE("histogram counts every point once") {
    FiniteDist d = g.histogram(pts);
    double total = 0.0;
    for (double p : d.probs) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("mask matches the predicate on cell centers") {
    ConceptSet left{[](std::span<const double> p) { return p[0] < 0.5; }, "left half"};
    std::vector<bool> m = g.mask(left);
    int count = 0;
    for (bool b : m) count += b ? 1 : 0;
    CHECK(count == 8);  // half the 4x4 grid
  }
}
