#include "sgrad/schedule.hpp"

#include <string>

#include "sgrad/error.hpp"

namespace sgrad {

void NoiseSchedule::check_t(int t) const {
  if (t < 1 || static_cast<std::size_t>(t) > T) {
    throw Error("NoiseSchedule: t=" + std::to_string(t) + " out of range [1, " +
                std::to_string(T) + "]");
  }
}

double NoiseSchedule::beta_at(int t) const {
  check_t(t);
  return beta[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::alpha_at(int t) const {
  check_t(t);
  return alpha[static_cast<std::size_t>(t) - 1];
}

double NoiseSchedule::alpha_bar_at(int t) const {
  check_t(t);
  return alpha_bar[static_cast<std::size_t>(t) - 1];
}

NoiseSchedule make_schedule(std::size_t T, double beta_start, double beta_end) {
  if (T < 1) throw Error("make_schedule: T must be >= 1");
  if (!(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0)) {
    throw Error("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
    s.beta[i] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

}  // namespace sgrad
