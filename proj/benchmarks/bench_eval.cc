#include <benchmark/benchmark.h>

#include "sgrad/leakage.hpp"
#include "sgrad/metrics.hpp"
#include "sgrad/rng.hpp"

using namespace sgrad;

namespace {

void BM_tv_distance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  std::vector<std::int64_t> support(n);
  std::vector<double> p(n), q(n);
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    support[i] = static_cast<std::int64_t>(i);
    p[i] = rng.uniform();
    q[i] = rng.uniform();
    sp += p[i];
    sq += q[i];
  }
  double ap = 0.0, aq = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p[i] /= sp;
    q[i] /= sq;
    ap += p[i];
    aq += q[i];
  }
  p[n - 1] = 1.0 - ap;
  q[n - 1] = 1.0 - aq;
  FiniteDist dp = FiniteDist::from_probs(support, p);
  FiniteDist dq = FiniteDist::from_probs(support, q);
  for (auto _ : state) benchmark::DoNotOptimize(tv_distance(dp, dq));
}
BENCHMARK(BM_tv_distance)->Arg(1024)->Arg(4096);

void BM_copy_score(benchmark::State& state) {
  Rng rng(9);
  Tensor generated = Tensor::randn({static_cast<std::size_t>(state.range(0)), 2}, rng);
  ProtectedSet prot{Tensor::randn({8, 2}, rng), {}};
  for (auto _ : state) benchmark::DoNotOptimize(copy_score(generated, prot));
}
BENCHMARK(BM_copy_score)->Arg(128)->Arg(512);

void BM_hit_rate(benchmark::State& state) {
  ConceptSet s{[](std::span<const double> x) { return x[0] < 0.1; }, "x < 0.1"};
  auto sampler = [](Rng& rng, std::vector<double>& out) { out.assign(1, rng.uniform()); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        empirical_hit_rate(sampler, s, static_cast<int>(state.range(0)), 2000, 11));
  }
}
BENCHMARK(BM_hit_rate)->Arg(5)->Arg(100);

}  // namespace
