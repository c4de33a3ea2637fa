// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voxbayes/volume.hpp"

namespace voxbayes {

inline constexpr std::size_t kMaxExactPatches = 12;

/// Contiguous near-equal blocks; patch id = (ix * gy + iy) * gz + iz.
struct PatchPartition {
  std::array<std::size_t, 3> grid{1, 1, 1};
  Shape shape;
  std::vector<std::vector<std::size_t>> voxels;  // flat voxel indices per patch

  std::size_t size() const { return voxels.size(); }
  std::vector<bool> mask(std::size_t patch) const;
};

/// Block extents along one axis: base n / g with the remainder given one
/// voxel each to the trailing blocks.
std::vector<std::size_t> split_extent(std::size_t n, std::size_t g);

PatchPartition partition_volume(const Shape& shape, const std::array<std::size_t, 3>& grid);

/// Class-1 probability of a volume.
using ModelFn = std::function<double(const Volume&)>;

struct AttributionMap {
  std::array<std::size_t, 3> grid{1, 1, 1};
  int class_id = 1;
  double base_value = 0.0;    // f(baseline)
  double target_value = 0.0;  // f(x)
  std::vector<double> values;  // one per patch
};

/// Class-0 view: values negated, base and target replaced by 1 - p.
AttributionMap for_class(const AttributionMap& class1, int class_id);

/// Patches in `coalition` come from `volume`, the rest from `baseline`.
Volume compose(const Volume& volume, const Volume& baseline, const PatchPartition& partition,
               const std::vector<bool>& coalition);

/// All-zero volume of the same shape.
Volume zeros_like(const Volume& volume);

/// Exact Shapley values by enumerating all 2^n coalitions (n <= 12).
AttributionMap exact_shapley(const ModelFn& f, const Volume& volume, const PatchPartition& partition,
                             const Volume& baseline);

/// Mean marginal contribution over random orderings; deterministic per seed.
AttributionMap sampled_shapley(const ModelFn& f, const Volume& volume, const PatchPartition& partition,
                               const Volume& baseline, std::size_t permutations, std::uint64_t seed);

/// {grid, base_value, target_value, values, class_id}
std::string attribution_json(const std::vector<AttributionMap>& maps, const std::string& baseline_name);

/// Axial-slice montage with one panel per class; positive red, negative blue,
/// symmetric scale. The caption prints both class probabilities.
std::string render_attribution_overlay(const Volume& volume, const PatchPartition& partition,
                                       const AttributionMap& class1);

}  // namespace voxbayes
