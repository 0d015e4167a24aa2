#pragma once

#include <cstdint>
#include <filesystem>

#include "credfed/model.hpp"

namespace credfed {

// Binary checkpoint, little-endian:
//
//   offset  size  field
//   0       8     magic "CFDCKPT\0"
//   8       4     format version (uint32, currently 1)
//   12      4     reserved, zero
//   16      8     root seed (uint64)
//   24      8     round index of the stored model (int64, 0 = initial)
//   32      48    num_features, embed_dim, num_heads, ff_hidden,
//                 head_hidden, num_classes (uint64 each)
//   80      8     layer_norm_eps (IEEE-754 double)
//   88      8     parameter count P (uint64)
//   96      8*P   flattened parameters (IEEE-754 double, layout order)
struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
  std::int64_t round = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace credfed
