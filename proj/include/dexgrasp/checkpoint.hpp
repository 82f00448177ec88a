#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dexgrasp/adam.hpp"
#include "dexgrasp/network.hpp"

namespace dexgrasp {

/// Binary checkpoint, little-endian throughout:
///   magic "DXGN" | u32 version | u64 arch_hash | arch string | provenance
///   string | u64 epoch | 4 x u64 rng state | u64 n_tensors | tensors.
/// Each tensor: u32 name length, name bytes, u32 rank, u64 dims, then the
/// payload as float64 in row-major order. Strings are u32-length-prefixed.
struct CheckpointMeta {
  std::string provenance;  // which model / which data produced this
  std::uint64_t epoch = 0;
  std::array<std::uint64_t, 4> rng_state{};
};

struct LoadedCheckpoint {
  Network net;
  CheckpointMeta meta;
  AdamState opt;       // empty when the checkpoint carried no optimizer state
  bool has_opt = false;
};

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const CheckpointMeta& meta,
                     const AdamState* opt = nullptr);

/// Rebuilds the network from the stored architecture description and loads
/// every tensor. If `required_arch_hash` is given and does not match the
/// stored hash, loading is refused.
LoadedCheckpoint load_checkpoint(
    const std::filesystem::path& path,
    std::optional<std::uint64_t> required_arch_hash = std::nullopt);

/// Parses the canonical arch_string back into a NetworkConfig (init_seed 0).
NetworkConfig parse_arch_string(const std::string& arch);

}  // namespace dexgrasp
