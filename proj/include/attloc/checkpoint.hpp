#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "attloc/features.hpp"
#include "attloc/model.hpp"

namespace attloc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary model snapshot: magic "ATLC", format version, normalization stats,
// mode, then a named tensor table (little-endian doubles). Round trips are
// bit-exact; unknown versions are rejected.
struct Checkpoint {
  NormStats norm;
  ModelMode mode = ModelMode::kAttLoc;
  ModelParams params;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace attloc
