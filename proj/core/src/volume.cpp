// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "voxbayes/errors.hpp"

namespace voxbayes {

const std::vector<HuWindow>& standard_hu_windows() {
  static const std::vector<HuWindow> windows{
      {"W1", -1000.0, 400.0},
      {"W2", -1100.0, 500.0},
      {"W3", -950.0, 550.0},
      {"W4", -1000.0, 0.0},
  };
  return windows;
}

HuWindow hu_window(const std::string& id) {
  for (const auto& w : standard_hu_windows()) {
    if (w.id == id) return w;
  }
  throw ConfigError("unknown HU window '" + id + "' (expected W1..W4)");
}

Volume apply_hu_window(const Volume& volume, const HuWindow& window) {
  if (!(window.lower < window.upper)) {
    throw ConfigError("HU window " + window.id + " must have lower < upper");
  }
  Volume out = volume;
  const double width = window.upper - window.lower;
  for (auto& v : out.voxels.data()) {
    v = (std::clamp(v, window.lower, window.upper) - window.lower) / width;
  }
  out.transforms.push_back("hu_window:" + window.id);
  return out;
}

namespace {

void require_volume(const Volume& v, const char* op) {
  if (v.voxels.rank() != 3) {
    throw ShapeError(std::string(op) + ": expected an (X,Y,Z) volume, got " +
                     shape_str(v.voxels.shape()));
  }
}

void clip_unit(Tensor& t) {
  for (auto& v : t.data()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

double sample_trilinear(const Tensor& voxels, double x, double y, double z) {
  const auto& s = voxels.shape();
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const double tx = x - fx, ty = y - fy, tz = z - fz;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy), z0 = static_cast<long>(fz);
  double acc = 0.0;
  for (int dx = 0; dx < 2; ++dx) {
    const double wx = dx ? tx : 1.0 - tx;
    const long xi = x0 + dx;
    if (wx == 0.0 || xi < 0 || xi >= static_cast<long>(s[0])) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? ty : 1.0 - ty;
      const long yi = y0 + dy;
      if (wy == 0.0 || yi < 0 || yi >= static_cast<long>(s[1])) continue;
      for (int dz = 0; dz < 2; ++dz) {
        const double wz = dz ? tz : 1.0 - tz;
        const long zi = z0 + dz;
        if (wz == 0.0 || zi < 0 || zi >= static_cast<long>(s[2])) continue;
        acc += wx * wy * wz *
               voxels[(static_cast<std::size_t>(xi) * s[1] + static_cast<std::size_t>(yi)) * s[2] +
                      static_cast<std::size_t>(zi)];
      }
    }
  }
  return acc;
}

Volume rotate_z(const Volume& volume, double degrees) {
  require_volume(volume, "rotate_z");
  Volume out = volume;
  const auto& s = volume.voxels.shape();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), sn = std::sin(theta);
  const double cx = (static_cast<double>(s[0]) - 1.0) / 2.0;
  const double cy = (static_cast<double>(s[1]) - 1.0) / 2.0;
  auto dst = out.voxels.data();
  for (std::size_t i = 0; i < s[0]; ++i) {
    for (std::size_t j = 0; j < s[1]; ++j) {
      // inverse map: rotate the output coordinate by -theta
      const double px = static_cast<double>(i) - cx, py = static_cast<double>(j) - cy;
      const double sx = c * px + sn * py + cx;
      const double sy = -sn * px + c * py + cy;
      for (std::size_t k = 0; k < s[2]; ++k) {
        dst[(i * s[1] + j) * s[2] + k] =
            sample_trilinear(volume.voxels, sx, sy, static_cast<double>(k));
      }
    }
  }
  std::ostringstream os;
  os << "rotate_z:" << degrees;
  out.transforms.push_back(os.str());
  return out;
}

Volume flip_axis(const Volume& volume, int axis) {
  require_volume(volume, "flip_axis");
  if (axis < 0 || axis > 2) throw ConfigError("flip_axis: axis must be 0, 1 or 2");
  Volume out = volume;
  const auto& s = volume.voxels.shape();
  auto src = volume.voxels.data();
  auto dst = out.voxels.data();
  for (std::size_t i = 0; i < s[0]; ++i)
    for (std::size_t j = 0; j < s[1]; ++j)
      for (std::size_t k = 0; k < s[2]; ++k) {
        std::array<std::size_t, 3> from{i, j, k};
        from[static_cast<std::size_t>(axis)] = s[static_cast<std::size_t>(axis)] - 1 -
                                               from[static_cast<std::size_t>(axis)];
        dst[(i * s[1] + j) * s[2] + k] = src[(from[0] * s[1] + from[1]) * s[2] + from[2]];
      }
  out.transforms.push_back("flip:" + std::to_string(axis));
  return out;
}

Volume add_gaussian_noise(const Volume& volume, Rng& rng, double sigma) {
  if (sigma < 0.0) throw ConfigError("augment: noise sigma must be >= 0");
  Volume out = volume;
  if (sigma == 0.0) return out;
  for (auto& v : out.voxels.data()) v += sigma * rng.normal();
  std::ostringstream os;
  os << "noise:" << sigma;
  out.transforms.push_back(os.str());
  return out;
}

Volume augment(const Volume& volume, Rng& rng, const AugmentPolicy& policy) {
  require_volume(volume, "augment");
  if (policy.noise_sigma < 0.0) throw ConfigError("augment: noise sigma must be >= 0");
  if (policy.max_angle_deg < 0.0) throw ConfigError("augment: max angle must be >= 0");
  Volume out = volume;
  if (policy.rotate && policy.max_angle_deg > 0.0) {
    const double angle = rng.uniform(-policy.max_angle_deg, policy.max_angle_deg);
    out = rotate_z(out, angle);
  }
  if (policy.flip) {
    for (int axis = 0; axis < 3; ++axis) {
      if (rng.bernoulli(policy.flip_probability)) out = flip_axis(out, axis);
    }
  }
  out = add_gaussian_noise(out, rng, policy.noise_sigma);
  clip_unit(out.voxels);
  return out;
}

}  // namespace voxbayes
