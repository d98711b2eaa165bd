#pragma once

#include <array>
#include <cstdint>

namespace sgrad {

// Deterministic, serializable PRNG (xoshiro256**). Standard-library
// distributions are implementation-defined, so normal draws use an explicit
// Box-Muller transform; every stream is reproducible bit-for-bit and the
// 4-word state round-trips through checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent substream: hashes (seed, stream) into a fresh state.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal. Consumes exactly two uniforms (no cached spare, so the
  // state stays 4 words).
  double normal();

  // Uniform integer in [0, n), unbiased. n must be >= 1.
  std::uint64_t below(std::uint64_t n);

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace sgrad
