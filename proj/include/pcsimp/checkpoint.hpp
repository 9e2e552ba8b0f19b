#pragma once

#include <filesystem>
#include <string>

#include "pcsimp/network.hpp"

namespace pcs {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   char[8]   magic "PCSIMPCK"
//   u32       format version (NetworkParameters::kFormatVersion)
//   u32       metadata entry count, then per entry:
//               u32 key length, key bytes, u32 value length, value bytes
//   u32       tensor count, then per tensor in canonical order:
//               u32 name length, name bytes, u32 rank, u64 dims[rank],
//               f64 values[prod(dims)] in row-major order
//
// Metadata keys: latent_dim, graph_k, center_k, d_attn, phi_hidden,
// gamma_hidden, descriptor_k, h_policy, h_global, seed, generation.

std::string serialize_checkpoint(const NetworkParameters& params);
NetworkParameters deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NetworkParameters& params);
NetworkParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace pcs
