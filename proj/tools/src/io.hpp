// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voxbayes/dataset.hpp"

namespace voxbayes::cli {

/// Reads .nii or gzip-compressed .nii.gz.
Volume read_volume(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct PreparedEntry {
  std::string path;  // relative to the dataset directory
  SourceClass source_class = SourceClass::ct0;
  std::string split;  // train | test | validation | holdout
};

inline constexpr const char* kDatasetIndex = "dataset.csv";

void write_dataset_index(const std::filesystem::path& dir, const std::vector<PreparedEntry>& entries);
std::vector<PreparedEntry> read_dataset_index(const std::filesystem::path& dir);

/// Loads every volume of one split; the volume source is its file stem.
std::vector<LabeledSample> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace voxbayes::cli
