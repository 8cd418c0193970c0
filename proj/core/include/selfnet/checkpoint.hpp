#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include "selfnet/cae.hpp"
#include "selfnet/param_vector.hpp"

namespace selfnet {

// Checkpoint layout (all integers little-endian):
//   "SFNT" | version u16 | item count u32 | items...
// item: kind u8 (0=ParamVector, 1=LatentRecord, 2=CAEModel) | id (u16 len +
// UTF-8) | kind-specific metadata | payload length u64 | payload (f32 LE).
// metadata: kind 0 -> u16 ndims + ndims*u32 layer dims
//           kind 1 -> u64 original_len, u32 chunk_size, u32 latent_dim,
//                     u32 code_count, u16 ndims + ndims*u32
//           kind 2 -> u32 n, u32 h, u32 d, f32 lambda_c
inline constexpr std::uint16_t kCheckpointVersion = 1;

using CheckpointItem = std::variant<ParamVector, LatentRecord, CaeModel>;

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<CheckpointItem>& items);

std::vector<CheckpointItem> load_checkpoint(const std::filesystem::path& path);

}  // namespace selfnet
