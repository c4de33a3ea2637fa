// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxbayes/dataset.hpp"
#include "voxbayes/layers.hpp"

namespace voxbayes {

/// Synthetic blob task: class 0 is background noise only, class 1 adds a
/// Gaussian-intensity ellipsoid of random centre and radii.
struct SynthConfig {
  std::size_t n = 200;
  Extents3 shape{32, 32, 16};
  std::uint64_t seed = 7;
  double background = 0.2;
  double noise_sigma = 0.05;
  double min_amplitude = 0.45;
  double max_amplitude = 0.75;
  double min_radius = 2.0;
  double max_radius = 4.5;
};

/// Exactly floor(n/2) positives, in a seeded random order. Voxels lie in
/// [0, 1]; positives are tagged CT-2 or CT-3, negatives CT-0.
std::vector<LabeledSample> make_blob_dataset(const SynthConfig& config);

/// HU = -1000 + 1000 * v, the inverse of a [-1000, 0] window.
Volume to_hounsfield(const Volume& normalised);

}  // namespace voxbayes
