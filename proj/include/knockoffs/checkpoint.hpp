#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "knockoffs/optimizer.hpp"

namespace knockoffs {

// Versioned binary container for model parameters:
//   bytes 0..7   magic "KNOCKPT1"
//   bytes 8..15  little-endian u64 header length H
//   H bytes      UTF-8 JSON header: format_version, kind, arch, schedule,
//                seed, manifest [(name, shape, offset)], payload_doubles,
//                content_hash (FNV-1a 64 over the payload bytes)
//   rest          flat little-endian float64 parameter arrays
struct CheckpointHeader {
  std::string kind;  // "diffusion" | "autoencoder"
  nlohmann::json arch;
  nlohmann::json schedule;  // empty object when not applicable
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointHeader& header,
                     const std::vector<Param>& params);

struct LoadedCheckpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Replaces parameter values with same-named tensors from a checkpoint.
void restore_params(std::vector<Param>& params, const LoadedCheckpoint& ckpt);

}  // namespace knockoffs
