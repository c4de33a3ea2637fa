// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "voxbayes/errors.hpp"

namespace voxbayes {

std::vector<LabeledSample> make_blob_dataset(const SynthConfig& config) {
  if (config.n == 0) throw ConfigError("synth: n must be >= 1");
  for (auto e : config.shape) {
    if (e < 4) throw ConfigError("synth: every extent must be >= 4");
  }
  if (config.min_radius <= 0 || config.max_radius < config.min_radius ||
      config.max_amplitude < config.min_amplitude) {
    throw ConfigError("synth: invalid blob ranges");
  }
  const Rng root(config.seed);
  Rng order_rng = root.derive(0);
  std::vector<int> labels(config.n, 0);
  for (std::size_t i = 0; i < config.n / 2; ++i) labels[i] = 1;
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[order_rng.below(i)]);

  const auto [nx, ny, nz] = config.shape;
  std::vector<LabeledSample> out;
  out.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    Rng rng = root.derive(i + 1);
    LabeledSample s;
    s.label = labels[i];
    s.volume.voxels = Tensor(Shape{nx, ny, nz});
    auto v = s.volume.voxels.data();
    for (auto& x : v) x = config.background + config.noise_sigma * rng.normal();
    if (s.label == 1) {
      s.source_class = rng.bernoulli(0.5) ? SourceClass::ct2 : SourceClass::ct3;
      const double amp = rng.uniform(config.min_amplitude, config.max_amplitude);
      std::array<double, 3> centre{}, radius{};
      const std::array<double, 3> ext{double(nx), double(ny), double(nz)};
      for (int a = 0; a < 3; ++a) {
        const double r_max = std::min(config.max_radius, ext[a] / 4.0);
        radius[a] = rng.uniform(std::min(config.min_radius, r_max), r_max);
        centre[a] = rng.uniform(radius[a], ext[a] - 1.0 - radius[a]);
      }
      std::size_t idx = 0;
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
          for (std::size_t z = 0; z < nz; ++z, ++idx) {
            const double dx = (double(x) - centre[0]) / radius[0];
            const double dy = (double(y) - centre[1]) / radius[1];
            const double dz = (double(z) - centre[2]) / radius[2];
            v[idx] += amp * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
          }
    } else {
      s.source_class = SourceClass::ct0;
    }
    for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
    char name[32];
    std::snprintf(name, sizeof name, "blob_%04zu", i);
    s.volume.source = name;
    s.volume.transforms.push_back("synthetic_blob");
    out.push_back(std::move(s));
  }
  return out;
}

Volume to_hounsfield(const Volume& normalised) {
  Volume v = normalised;
  for (auto& x : v.voxels.data()) x = -1000.0 + 1000.0 * x;
  v.transforms.push_back("to_hounsfield");
  return v;
}

}  // namespace voxbayes
