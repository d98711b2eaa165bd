#include <bit>
#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "sgrad/denoiser.hpp"
#include "sgrad/diffusion.hpp"
#include "sgrad/error.hpp"
#include "sgrad/projection.hpp"

using namespace sgrad;

namespace {

bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

bool same_bits_pv(const ParamVector& a, const ParamVector& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.segment_count(); ++i) {
    if (!same_bits(a.segment(i).tensor.data(), b.segment(i).tensor.data())) return false;
  }
  return true;
}

ParamVector pv(std::vector<double> vals) {
  const std::size_t n = vals.size();
  ParamVector p;
  p.append("g", Tensor::from_data({n}, std::move(vals)));
  return p;
}

struct RandomStep {
  Denoiser model;
  Batch batch;
  Tensor emb_main;
  Tensor emb_feat;
  NoiseSchedule sched;
};

RandomStep make_random_step(std::uint64_t seed, std::size_t hidden = 12, std::size_t n = 4) {
  RandomStep s;
  Rng rng = Rng::substream(seed, 0xFEED);
  DenoiserSpec spec{.data_dim = 2, .hidden = hidden, .time_dim = 4, .emb_dim = 6};
  s.model = Denoiser::init(spec, rng, Denoiser::HeadInit::kRandom);
  s.sched = make_schedule(8, 1e-3, 0.08);
  s.emb_main = Tensor::randn({6}, rng);
  s.emb_feat = Tensor::randn({6}, rng);
  s.batch.x0 = Tensor::randn({n, 2}, rng);
  s.batch.noise = Tensor::randn({n, 2}, rng);
  s.batch.timesteps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.batch.timesteps[i] = 1 + static_cast<int>(rng.below(s.sched.T));
  }
  s.batch.concept_ids.assign(n, "c");
  return s;
}

}  // namespace

TEST_CASE("project: hand-evaluated examples") {
  ProjectionConfig full{.lambda = 1.0, .epsilon = 0.0, .eta = 0.1, .rescale_enabled = true};

  SUBCASE("g_main=(1,1,0), g_feat=(2,0,0) -> (0,1,0)") {
    ParamVector out = project(pv({1, 1, 0}), pv({2, 0, 0}), full);
    CHECK(out.segment(0).tensor[0] == 0.0);
    CHECK(out.segment(0).tensor[1] == 1.0);
    CHECK(out.segment(0).tensor[2] == 0.0);
  }

  SUBCASE("orthogonal gradients pass through bit-exactly for any lambda") {
    for (double lambda : {0.0, 0.1, 0.5, 1.0}) {
      ProjectionConfig cfg{.lambda = lambda, .epsilon = 0.0, .eta = 0.1, .rescale_enabled = true};
      ParamVector g_main = pv({0.3, -0.7, 0.0});
      ParamVector out = project(g_main, pv({0, 0, 5}), cfg);
      CHECK(same_bits_pv(out, g_main));
    }
  }

  SUBCASE("parallel gradients are fully excised at lambda=1") {
    ParamVector out = project(pv({2, 0}), pv({1, 0}), full);
    CHECK(out.segment(0).tensor[0] == 0.0);
    CHECK(out.segment(0).tensor[1] == 0.0);
  }

  SUBCASE("zero g_feat passes g_main through (eps guard and eps=0 limit)") {
    ParamVector g_main = pv({1, 2, 3});
    ProjectionConfig eps_cfg{.lambda = 1.0, .epsilon = 1e-8, .eta = 0.1, .rescale_enabled = true};
    CHECK(same_bits_pv(project(g_main, pv({0, 0, 0}), eps_cfg), g_main));
    CHECK(same_bits_pv(project(g_main, pv({0, 0, 0}), full), g_main));
  }

  SUBCASE("layout mismatch is an error") {
    ParamVector other;
    other.append("different", Tensor::zeros({3}));
    CHECK_THROWS_AS(project(pv({1, 2, 3}), other, full), ShapeError);
  }

  SUBCASE("invalid config rejected") {
    ProjectionConfig bad{.lambda = 1.5, .epsilon = 0.0, .eta = 0.1, .rescale_enabled = true};
    CHECK_THROWS_AS(project(pv({1}), pv({1}), bad), Error);
  }
}

TEST_CASE("rescale") {
  SUBCASE("matches the norm of g_main") {
    ParamVector g_perp = pv({0, 1, 0});
    ParamVector g_main = pv({1, 1, 0});  // norm sqrt(2)
    ParamVector out = rescale(g_perp, g_main);
    CHECK(out.segment(0).tensor[1] == doctest::Approx(1.4142135623730951).epsilon(1e-12));
    CHECK(norm(out) == doctest::Approx(norm(g_main)).epsilon(1e-12));
  }

  SUBCASE("identity when g_perp == g_main") {
    ParamVector g = pv({0.25, -0.5, 0.125});
    CHECK(same_bits_pv(rescale(g, g), g));
  }

  SUBCASE("degenerate collapse throws") {
    CHECK_THROWS_AS(rescale(pv({0, 0, 0}), pv({1, 0, 0})), DegenerateGradient);
    CHECK_THROWS_AS(rescale(pv({1e-14, 0, 0}), pv({1, 0, 0})), DegenerateGradient);
  }
}

TEST_CASE("apply_update") {
  SUBCASE("eta = 0 leaves theta unchanged") {
    ParamVector theta = pv({1, 1});
    CHECK(same_bits_pv(apply_update(theta, pv({5, -3}), 0.0), theta));
  }
  SUBCASE("hand value") {
    ParamVector out = apply_update(pv({1, 1}), pv({1, 0}), 0.5);
    CHECK(out.segment(0).tensor[0] == 0.5);
    CHECK(out.segment(0).tensor[1] == 1.0);
  }
  SUBCASE("two sequential updates match one combined update") {
    ParamVector theta = pv({0.8, -0.3, 0.1});
    ParamVector g1 = pv({0.2, 0.5, -0.1});
    ParamVector g2 = pv({-0.4, 0.25, 0.3});
    ParamVector seq = apply_update(apply_update(theta, g1, 0.1), g2, 0.1);
    ParamVector combined = apply_update(theta, add_scaled(g1, 1.0, g2), 0.1);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(seq.segment(0).tensor[i] ==
            doctest::Approx(combined.segment(0).tensor[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("capacity") {
  SUBCASE("hand projection: theta=(3,4,0), g=(1,0,0) -> 9") {
    CHECK(capacity(pv({3, 4, 0}), pv({1, 0, 0})) == doctest::Approx(9.0).epsilon(1e-12));
  }
  SUBCASE("orthogonal theta has zero capacity") {
    CHECK(capacity(pv({0, 4, 0}), pv({1, 0, 0})) == 0.0);
  }
  SUBCASE("projector is scale-invariant in g_feat") {
    const double a = capacity(pv({3, 4, 1}), pv({1, 2, -1}));
    const double b = capacity(pv({3, 4, 1}), pv({5, 10, -5}));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  SUBCASE("zero direction rejected") {
    CHECK_THROWS_AS(capacity(pv({1, 2}), pv({0, 0})), Error);
  }
}

TEST_CASE("compute_pair_grads") {
  RandomStep s = make_random_step(1);

  SUBCASE("identical prompts give bit-identical gradients") {
    PairGrads pg = compute_pair_grads(s.model, s.batch, s.emb_main, s.emb_main, s.sched);
    CHECK(same_bits_pv(pg.g_main, pg.g_feat));
    CHECK(pg.loss_main == pg.loss_feat);
  }

  SUBCASE("zero-head model: both losses equal the noise mean square") {
    Rng rng(77);
    DenoiserSpec spec{.data_dim = 2, .hidden = 8, .time_dim = 4, .emb_dim = 6};
    Denoiser zero_model = Denoiser::init(spec, rng, Denoiser::HeadInit::kZero);
    double ms = 0.0;
    for (double v : s.batch.noise.data()) ms += v * v;
    ms /= static_cast<double>(s.batch.noise.size());
    PairGrads pg = compute_pair_grads(zero_model, s.batch, s.emb_main, s.emb_feat, s.sched);
    CHECK(pg.loss_main == doctest::Approx(ms).epsilon(1e-12));
    CHECK(pg.loss_feat == doctest::Approx(ms).epsilon(1e-12));
  }
}

TEST_CASE("projected_step: orthogonality and capacity invariance at lambda=1, eps=0") {
  // Smaller inline version of the acceptance loop.
  ProjectionConfig cfg{.lambda = 1.0, .epsilon = 0.0, .eta = 0.01, .rescale_enabled = true};
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    RandomStep s = make_random_step(trial);
    PairGrads pg = compute_pair_grads(s.model, s.batch, s.emb_main, s.emb_feat, s.sched);
    const double feat_norm = norm(pg.g_feat);
    ProjectionReport r =
        projected_step(s.model, s.batch, s.emb_main, s.emb_feat, s.sched, cfg, 0);

    CHECK(std::abs(r.dot_proj_feat) <= 1e-9 * r.norm_proj * feat_norm);
    CHECK(std::abs(r.capacity_after - r.capacity_before) <= 1e-9 * (1.0 + r.capacity_before));
    CHECK(r.norm_proj == doctest::Approx(r.norm_main).epsilon(1e-12));
  }
}

TEST_CASE("projected_step: eps > 0 keeps the capacity drift within 1e-6") {
  ProjectionConfig cfg{.lambda = 1.0, .epsilon = 1e-8, .eta = 0.01, .rescale_enabled = true};
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    RandomStep s = make_random_step(500 + trial);
    ProjectionReport r =
        projected_step(s.model, s.batch, s.emb_main, s.emb_feat, s.sched, cfg, 0);
    CHECK(std::abs(r.capacity_after - r.capacity_before) <= 1e-6);
  }
}

TEST_CASE("projected_step: lambda semantics") {
  SUBCASE("lambda = 0 reproduces the naive step bit-for-bit") {
    RandomStep s1 = make_random_step(9);
    RandomStep s2 = make_random_step(9);
    ProjectionConfig cfg{.lambda = 0.0, .epsilon = 1e-8, .eta = 0.05, .rescale_enabled = true};

    ParamVector g_main;
    dsm_loss_grad(s1.model, s1.batch, s1.emb_main, s1.sched, &g_main);
    ParamVector naive_theta = apply_update(s1.model.trainable(), g_main, cfg.eta);

    ProjectionReport r = projected_step(s2.model, s2.batch, s2.emb_main, s2.emb_feat, s2.sched,
                                        cfg, 0);
    CHECK(same_bits_pv(naive_theta, s2.model.trainable()));
    CHECK(r.dot_proj_feat == r.dot_main_feat);
    CHECK(r.norm_proj == r.norm_main);
  }

  SUBCASE("lambda = 0.1 leaves a (1 - lambda) residual before rescale") {
    RandomStep s = make_random_step(10);
    PairGrads pg = compute_pair_grads(s.model, s.batch, s.emb_main, s.emb_feat, s.sched);
    ProjectionConfig cfg{.lambda = 0.1, .epsilon = 0.0, .eta = 0.05, .rescale_enabled = true};

    ParamVector g_perp = project(pg.g_main, pg.g_feat, cfg);
    const double before = dot(pg.g_main, pg.g_feat);
    const double after = dot(g_perp, pg.g_feat);
    CHECK(after == doctest::Approx(0.9 * before).epsilon(1e-9));

    // In the report, the rescale factor c = ||g_main|| / ||g_perp|| applies.
    ProjectionReport r = projected_step(s.model, s.batch, s.emb_main, s.emb_feat, s.sched, cfg, 3);
    const double c = r.norm_main / r.norm_perp;
    CHECK(r.dot_proj_feat == doctest::Approx(c * 0.9 * r.dot_main_feat).epsilon(1e-9));
    CHECK(r.step == 3);
    CHECK(r.lambda_used == 0.1);
  }
}

TEST_CASE("first-order neutrality: feature loss is flat along the projected update") {
  ProjectionConfig cfg{.lambda = 1.0, .epsilon = 0.0, .eta = 0.01, .rescale_enabled = true};
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    RandomStep s = make_random_step(900 + trial);
    PairGrads pg = compute_pair_grads(s.model, s.batch, s.emb_main, s.emb_feat, s.sched);
    ParamVector g_proj = rescale(project(pg.g_main, pg.g_feat, cfg), pg.g_main);

    const ParamVector theta = s.model.trainable();
    auto feat_loss_at = [&](const ParamVector& t) {
      Denoiser m = s.model;
      m.set_trainable(t);
      return dsm_loss_grad(m, s.batch, s.emb_feat, s.sched, nullptr);
    };
    const double h = 1e-5;
    const double lp = feat_loss_at(add_scaled(theta, -h, g_proj));
    const double lm = feat_loss_at(add_scaled(theta, h, g_proj));
    const double directional = (lp - lm) / (2.0 * h);
    CHECK(std::abs(directional) <= 1e-3 * norm(pg.g_feat));
  }
}

TEST_CASE("adversarial-direction closure: any auxiliary prompt is annihilated") {
  ProjectionConfig cfg{.lambda = 1.0, .epsilon = 0.0, .eta = 0.01, .rescale_enabled = true};
  RandomStep s = make_random_step(77);
  ParamVector g_main;
  dsm_loss_grad(s.model, s.batch, s.emb_main, s.sched, &g_main);

  for (std::uint64_t trial = 0; trial < 25; ++trial) {
    Rng rng = Rng::substream(4000, trial);
    Tensor adv_emb = Tensor::randn({6}, rng);
    ParamVector g_adv;
    dsm_loss_grad(s.model, s.batch, adv_emb, s.sched, &g_adv);
    ParamVector g_proj = rescale(project(g_main, g_adv, cfg), g_main);
    CHECK(std::abs(dot(g_proj, g_adv)) <= 1e-9 * norm(g_proj) * norm(g_adv));
  }
}

TEST_CASE("projected_step: degenerate parallel gradients skip the update") {
  RandomStep s = make_random_step(55);
  ProjectionConfig cfg{.lambda = 1.0, .epsilon = 0.0, .eta = 0.05, .rescale_enabled = true};
  const ParamVector before = s.model.trainable();
  // Same prompt on both passes makes g_feat == g_main: full excision.
  CHECK_THROWS_AS(
      projected_step(s.model, s.batch, s.emb_main, s.emb_main, s.sched, cfg, 0),
      DegenerateGradient);
  CHECK(same_bits_pv(before, s.model.trainable()));
}

TEST_CASE("report sink and CSV schema") {
  ReportSink sink;
  ProjectionReport r;
  r.step = 2;
  r.dot_main_feat = 0.5;
  r.lambda_used = 1.0;
  sink.append(r);
  sink.append(r);
  CHECK(sink.size() == 2);
  CHECK(sink.snapshot()[0].step == 2);

  CHECK(std::string(kProjectionCsvHeader) ==
        "step,dot_main_feat,dot_proj_feat,norm_main,norm_perp,norm_proj,"
        "capacity_before,capacity_after,lambda_used");
  const std::string row = projection_csv_row(r);
  CHECK(row.substr(0, 2) == "2,");
  CHECK(std::count(row.begin(), row.end(), ',') == 8);
}
