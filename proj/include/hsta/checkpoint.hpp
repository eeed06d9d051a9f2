#pragma once

#include <cstdint>
#include <filesystem>

#include "hsta/model.hpp"

namespace hsta {

struct Checkpoint {
  ModelParams model;
  std::uint64_t seed = 0;
};

/// Writes manifest.json (config, seed, parameter names and shapes) and one
/// tensor file per parameter under params/.
void save_checkpoint(const std::filesystem::path& dir, ModelParams& model, std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace hsta
