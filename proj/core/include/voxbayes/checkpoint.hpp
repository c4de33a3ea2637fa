// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "voxbayes/layers.hpp"
#include "voxbayes/tensor.hpp"

namespace voxbayes {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  NetworkSpec spec;
  std::map<std::string, Tensor> arrays;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

/// Canonical JSON text of a network spec (sorted keys, no whitespace).
std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);
/// FNV-1a 64 of the canonical spec JSON, as 16 hex digits.
std::string spec_hash(const NetworkSpec& spec);

/// Writes `checkpoint.json` and `weights.bin` into `dir` (created if needed).
/// weights.bin is a sequence of little-endian records
/// [u32 name length][name][u32 rank][u64 dims...][f64 data...].
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string encode_arrays(const std::map<std::string, Tensor>& arrays);
std::map<std::string, Tensor> decode_arrays(const std::string& bytes);

}  // namespace voxbayes
