#pragma once

#include <cstddef>
#include <vector>

namespace sgrad {

// Per-timestep noising tables. Timesteps are 1-based: index t-1 holds the
// values for step t. Fields are public so tests can inject degenerate
// schedules; make_schedule() is the validated constructor.
struct NoiseSchedule {
  std::size_t T = 0;
  std::vector<double> beta;       // in (0,1)
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // cumulative product of alpha, strictly decreasing

  double beta_at(int t) const;
  double alpha_at(int t) const;
  double alpha_bar_at(int t) const;
  void check_t(int t) const;
};

// Linear beta interpolation over T steps; T=1 uses beta_start.
// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(std::size_t T, double beta_start, double beta_end);

}  // namespace sgrad
