#include "sgrad/diffusion.hpp"

#include <cmath>

namespace sgrad {

void Batch::validate(const NoiseSchedule& sched) const {
  if (x0.rank() != 2 || noise.rank() != 2 || !x0.same_shape(noise)) {
    throw ShapeError("Batch: x0 and noise must be matching [n, d] tensors");
  }
  if (concept_ids.size() != x0.rows() || timesteps.size() != x0.rows()) {
    throw ShapeError("Batch: concept_ids/timesteps length must equal the row count");
  }
  for (int t : timesteps) sched.check_t(t);
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  if (!x0.same_shape(eps)) throw ShapeError("q_sample: x0 and eps shapes differ");
  const double abar = sched.alpha_bar_at(t);
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  Tensor out = x0;
  auto d = out.data();
  auto e = eps.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a * d[i] + b * e[i];
  return out;
}

Tensor q_sample_batch(const Tensor& x0, std::span<const int> timesteps, const Tensor& eps,
                      const NoiseSchedule& sched) {
  if (!x0.same_shape(eps)) throw ShapeError("q_sample_batch: x0 and eps shapes differ");
  if (x0.rank() != 2 || timesteps.size() != x0.rows()) {
    throw ShapeError("q_sample_batch: need [n, d] tensors and n timesteps");
  }
  Tensor out = x0;
  const std::size_t d = x0.cols();
  for (std::size_t i = 0; i < x0.rows(); ++i) {
    const double abar = sched.alpha_bar_at(timesteps[i]);
    const double a = std::sqrt(abar);
    const double b = std::sqrt(1.0 - abar);
    for (std::size_t j = 0; j < d; ++j) {
      out.at(i, j) = a * out.at(i, j) + b * eps.at(i, j);
    }
  }
  return out;
}

}  // namespace sgrad
