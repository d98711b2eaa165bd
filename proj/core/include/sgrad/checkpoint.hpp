#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgrad/denoiser.hpp"
#include "sgrad/embedding.hpp"
#include "sgrad/schedule.hpp"

namespace sgrad {

// Full training state at a stage boundary. The binary layout is: magic
// "SGRD", u32 version, then length-prefixed sections (stage tag, model
// hyperparameters, named parameter segments as shape-headed little-endian
// f64 arrays, embedding table, schedule betas, RNG state). save -> load ->
// save is byte-identical.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string stage;  // "init" | "pretrained" | "finetuned_naive" | "finetuned_projected"
  Denoiser model;
  EmbeddingTable table;
  NoiseSchedule schedule;
  std::array<std::uint64_t, 4> rng_state{};
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgrad
