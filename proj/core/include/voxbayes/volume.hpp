// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "voxbayes/rng.hpp"
#include "voxbayes/tensor.hpp"

namespace voxbayes {

/// A scan: voxels of shape (X,Y,Z) plus where it came from and what was done to it.
struct Volume {
  Tensor voxels;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::string source;
  std::vector<std::string> transforms;

  const Shape& shape() const { return voxels.shape(); }
};

struct HuWindow {
  std::string id;
  double lower = 0.0;
  double upper = 0.0;
};

/// Windows W1..W4 used for lung CT (lower/upper HU limits).
const std::vector<HuWindow>& standard_hu_windows();
/// Lookup by id ("W1".."W4"); ConfigError if unknown.
HuWindow hu_window(const std::string& id);

/// Clip to [lower, upper] and map affinely onto [0, 1].
Volume apply_hu_window(const Volume& volume, const HuWindow& window);

struct AugmentPolicy {
  bool rotate = true;
  double max_angle_deg = 20.0;
  bool flip = true;
  double flip_probability = 0.5;
  double noise_sigma = 0.01;
};

/// Random rotation about Z, independent axis flips and Gaussian noise, in that
/// order, then clipping to [0, 1]. Shape is preserved.
Volume augment(const Volume& volume, Rng& rng, const AugmentPolicy& policy);

/// Rotation in the (X,Y) plane about the slice centre, trilinear sampling with
/// zero fill outside the grid.
Volume rotate_z(const Volume& volume, double degrees);
Volume flip_axis(const Volume& volume, int axis);
Volume add_gaussian_noise(const Volume& volume, Rng& rng, double sigma);

/// Trilinear sample at a fractional voxel coordinate; out-of-grid corners read 0.
double sample_trilinear(const Tensor& voxels, double x, double y, double z);

}  // namespace voxbayes
