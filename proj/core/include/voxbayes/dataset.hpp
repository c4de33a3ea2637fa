// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "voxbayes/rng.hpp"
#include "voxbayes/volume.hpp"

namespace voxbayes {

/// Severity groups of the lung CT corpus.
enum class SourceClass { ct0, ct1, ct2, ct3, ct4 };

SourceClass parse_source_class(const std::string& text);
std::string to_string(SourceClass c);
/// CT-0 -> 0; every other group marks impairment -> 1.
int label_for(SourceClass c);
/// CT-1 and CT-4 are kept out of model development.
bool is_held_out(SourceClass c);

struct LabeledSample {
  Volume volume;
  int label = 0;
  SourceClass source_class = SourceClass::ct0;
};

struct ManifestEntry {
  std::string path;
  SourceClass source_class = SourceClass::ct0;
};

/// Reads `path,source_class` CSV (header row required). Relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& csv);
void write_manifest(const std::filesystem::path& csv, const std::vector<ManifestEntry>& entries);

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplit{0.7, 0.2, 0.1};

struct SplitIndices {
  std::vector<std::size_t> train, test, validation;
};

/// Split sizes for n items: floors of n*ratio, remainder to train, then at
/// least one item per split taken from the largest split.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Shuffled, disjoint (train, test, validation) index sets covering 0..n-1.
SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, Rng& rng);

template <class T>
struct Split {
  std::vector<T> train, test, validation;
};

template <class T>
Split<T> split_dataset(const std::vector<T>& samples, const SplitRatios& ratios, Rng& rng) {
  const auto idx = split_indices(samples.size(), ratios, rng);
  Split<T> out;
  for (auto i : idx.train) out.train.push_back(samples[i]);
  for (auto i : idx.test) out.test.push_back(samples[i]);
  for (auto i : idx.validation) out.validation.push_back(samples[i]);
  return out;
}

}  // namespace voxbayes
