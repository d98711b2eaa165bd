#include <benchmark/benchmark.h>

#include "sgrad/denoiser.hpp"
#include "sgrad/diffusion.hpp"
#include "sgrad/projection.hpp"

using namespace sgrad;

namespace {

struct TrainFixture {
  DenoiserSpec spec;
  Denoiser model;
  NoiseSchedule sched = make_schedule(50, 1e-4, 0.05);
  Tensor emb_main;
  Tensor emb_feat;
  Batch batch;

  TrainFixture(std::size_t hidden, std::size_t batch_size) {
    Rng rng(7);
    spec = DenoiserSpec{.data_dim = 2, .hidden = hidden, .time_dim = 8, .emb_dim = 16};
    model = Denoiser::init(spec, rng, Denoiser::HeadInit::kRandom);
    emb_main = Tensor::randn({16}, rng);
    emb_feat = Tensor::randn({16}, rng);
    batch.x0 = Tensor::randn({batch_size, 2}, rng);
    batch.noise = Tensor::randn({batch_size, 2}, rng);
    batch.timesteps.resize(batch_size);
    for (auto& t : batch.timesteps) t = 1 + static_cast<int>(rng.below(sched.T));
    batch.concept_ids.assign(batch_size, "c");
  }
};

void BM_dsm_loss_forward(benchmark::State& state) {
  TrainFixture f(static_cast<std::size_t>(state.range(0)), 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsm_loss_grad(f.model, f.batch, f.emb_main, f.sched, nullptr));
  }
}
BENCHMARK(BM_dsm_loss_forward)->Arg(64)->Arg(128);

void BM_dsm_loss_gradient(benchmark::State& state) {
  TrainFixture f(static_cast<std::size_t>(state.range(0)), 32);
  ParamVector g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsm_loss_grad(f.model, f.batch, f.emb_main, f.sched, &g));
  }
}
BENCHMARK(BM_dsm_loss_gradient)->Arg(64)->Arg(128);

// The naive update against the constrained one: the second forward/backward
// pass for the feature prompt should show up as roughly doubled step cost.
void BM_naive_step(benchmark::State& state) {
  TrainFixture f(static_cast<std::size_t>(state.range(0)), 32);
  for (auto _ : state) {
    state.PauseTiming();
    Denoiser model = f.model;
    state.ResumeTiming();
    ParamVector g;
    dsm_loss_grad(model, f.batch, f.emb_main, f.sched, &g);
    model.set_trainable(apply_update(model.trainable(), g, 0.01));
    benchmark::DoNotOptimize(model);
  }
}
BENCHMARK(BM_naive_step)->Arg(64)->Arg(128);

void BM_projected_step(benchmark::State& state) {
  TrainFixture f(static_cast<std::size_t>(state.range(0)), 32);
  ProjectionConfig cfg{.lambda = 1.0, .epsilon = 1e-8, .eta = 0.01, .rescale_enabled = true};
  for (auto _ : state) {
    state.PauseTiming();
    Denoiser model = f.model;
    state.ResumeTiming();
    benchmark::DoNotOptimize(
        projected_step(model, f.batch, f.emb_main, f.emb_feat, f.sched, cfg, 0));
  }
}
BENCHMARK(BM_projected_step)->Arg(64)->Arg(128);

void BM_sampler(benchmark::State& state) {
  TrainFixture f(64, 1);
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_chain(
        [&](const Tensor& xt, std::span<const int> ts) {
          return f.model.predict(xt, ts, f.emb_main);
        },
        f.sched, n, 2, rng));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_sampler)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
