// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "voxbayes/errors.hpp"
#include "voxbayes/rng.hpp"
#include "voxbayes/svg.hpp"

namespace voxbayes {

std::vector<bool> PatchPartition::mask(std::size_t patch) const {
  std::vector<bool> m(numel(shape), false);
  for (auto i : voxels.at(patch)) m[i] = true;
  return m;
}

std::vector<std::size_t> split_extent(std::size_t n, std::size_t g) {
  if (g == 0 || g > n) {
    throw ConfigError("partition: grid extent " + std::to_string(g) + " does not fit axis of " +
                      std::to_string(n));
  }
  std::vector<std::size_t> sizes(g, n / g);
  for (std::size_t i = 0; i < n % g; ++i) sizes[g - 1 - i] += 1;
  return sizes;
}

PatchPartition partition_volume(const Shape& shape, const std::array<std::size_t, 3>& grid) {
  if (shape.size() != 3) throw ShapeError("partition_volume: expected a 3-D shape, got " + shape_str(shape));
  PatchPartition p;
  p.grid = grid;
  p.shape = shape;
  std::array<std::vector<std::size_t>, 3> owner;
  for (int a = 0; a < 3; ++a) {
    const auto sizes = split_extent(shape[a], grid[a]);
    for (std::size_t b = 0; b < sizes.size(); ++b) owner[a].insert(owner[a].end(), sizes[b], b);
  }
  p.voxels.resize(grid[0] * grid[1] * grid[2]);
  std::size_t flat = 0;
  for (std::size_t x = 0; x < shape[0]; ++x)
    for (std::size_t y = 0; y < shape[1]; ++y)
      for (std::size_t z = 0; z < shape[2]; ++z, ++flat) {
        const std::size_t id = (owner[0][x] * grid[1] + owner[1][y]) * grid[2] + owner[2][z];
        p.voxels[id].push_back(flat);
      }
  return p;
}

AttributionMap for_class(const AttributionMap& class1, int class_id) {
  if (class_id == 1) return class1;
  if (class_id != 0) throw ConfigError("attribution class must be 0 or 1");
  AttributionMap m = class1;
  m.class_id = 0;
  m.base_value = 1.0 - class1.base_value;
  m.target_value = 1.0 - class1.target_value;
  for (auto& v : m.values) v = -v;
  return m;
}

Volume zeros_like(const Volume& volume) {
  Volume v = volume;
  v.voxels.fill(0.0);
  v.transforms.push_back("zero_baseline");
  return v;
}

Volume compose(const Volume& volume, const Volume& baseline, const PatchPartition& partition,
               const std::vector<bool>& coalition) {
  if (volume.shape() != partition.shape || baseline.shape() != partition.shape) {
    throw ShapeError("shap: volume " + shape_str(volume.shape()) + " / baseline " +
                     shape_str(baseline.shape()) + " do not match partition " + shape_str(partition.shape));
  }
  Volume out = baseline;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (!coalition[i]) continue;
    for (auto v : partition.voxels[i]) out.voxels[v] = volume.voxels[v];
  }
  return out;
}

AttributionMap exact_shapley(const ModelFn& f, const Volume& volume, const PatchPartition& partition,
                             const Volume& baseline) {
  const std::size_t n = partition.size();
  if (n > kMaxExactPatches) {
    throw TooManyPatches("exact_shapley: " + std::to_string(n) + " patches exceed the limit of " +
                         std::to_string(kMaxExactPatches));
  }
  const std::size_t total = std::size_t{1} << n;
  std::vector<double> value(total);
  std::vector<bool> coalition(n);
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t i = 0; i < n; ++i) coalition[i] = (s >> i) & 1u;
    value[s] = f(compose(volume, baseline, partition, coalition));
  }
  // weight[k] = k! (n-k-1)! / n!
  std::vector<double> weight(n);
  for (std::size_t k = 0; k < n; ++k) {
    weight[k] = std::exp(std::lgamma(static_cast<double>(k + 1)) + std::lgamma(static_cast<double>(n - k)) -
                         std::lgamma(static_cast<double>(n + 1)));
  }
  AttributionMap m;
  m.grid = partition.grid;
  m.values.assign(n, 0.0);
  m.base_value = value[0];
  m.target_value = value[total - 1];
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t s = 0; s < total; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
    m.values[i] = phi;
  }
  return m;
}

AttributionMap sampled_shapley(const ModelFn& f, const Volume& volume, const PatchPartition& partition,
                               const Volume& baseline, std::size_t permutations, std::uint64_t seed) {
  if (permutations == 0) throw ConfigError("sampled_shapley: need at least one permutation");
  const std::size_t n = partition.size();
  if (volume.shape() != partition.shape || baseline.shape() != partition.shape) {
    throw ShapeError("shap: volume does not match partition " + shape_str(partition.shape));
  }
  AttributionMap m;
  m.grid = partition.grid;
  m.values.assign(n, 0.0);
  m.base_value = f(baseline);
  m.target_value = f(volume);
  const Rng root(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < permutations; ++k) {
    Rng rng = root.derive(k);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    Volume current = baseline;
    double prev = m.base_value;
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t patch = order[step];
      for (auto v : partition.voxels[patch]) current.voxels[v] = volume.voxels[v];
      const double next = step + 1 == n ? m.target_value : f(current);
      m.values[patch] += next - prev;
      prev = next;
    }
  }
  for (auto& v : m.values) v /= static_cast<double>(permutations);
  return m;
}

std::string attribution_json(const std::vector<AttributionMap>& maps, const std::string& baseline_name) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : maps) {
    arr.push_back({{"class_id", m.class_id},
                   {"grid", m.grid},
                   {"base_value", m.base_value},
                   {"target_value", m.target_value},
                   {"values", m.values},
                   {"baseline", baseline_name}});
  }
  return arr.dump(2) + "\n";
}

std::string render_attribution_overlay(const Volume& volume, const PatchPartition& partition,
                                       const AttributionMap& class1) {
  const Shape& s = volume.shape();
  if (s != partition.shape || class1.values.size() != partition.size()) {
    throw ShapeError("render_attribution_overlay: volume, partition and attribution disagree");
  }
  const AttributionMap class0 = for_class(class1, 0);
  std::vector<std::size_t> owner(numel(s));
  for (std::size_t i = 0; i < partition.size(); ++i) {
    for (auto v : partition.voxels[i]) owner[v] = i;
  }
  double scale = 0.0;
  for (double v : class1.values) scale = std::max(scale, std::abs(v));

  const double cell = 3.0;
  const std::size_t cols = std::min<std::size_t>(s[2], 8);
  const std::size_t rows = (s[2] + cols - 1) / cols;
  const double tile_w = static_cast<double>(s[0]) * cell + 6;
  const double tile_h = static_cast<double>(s[1]) * cell + 6;
  const double panel_w = static_cast<double>(cols) * tile_w;
  const double panel_h = static_cast<double>(rows) * tile_h + 24;
  svg::Document doc(panel_w * 2 + 30, panel_h + 50);

  const AttributionMap* panels[2] = {&class0, &class1};
  for (int p = 0; p < 2; ++p) {
    const AttributionMap& m = *panels[p];
    const double ox = 10 + p * (panel_w + 10);
    doc.text(ox, 16, "class " + std::to_string(m.class_id) + " attribution", 12);
    for (std::size_t z = 0; z < s[2]; ++z) {
      const double tx = ox + static_cast<double>(z % cols) * tile_w;
      const double ty = 24 + static_cast<double>(z / cols) * tile_h;
      for (std::size_t x = 0; x < s[0]; ++x)
        for (std::size_t y = 0; y < s[1]; ++y) {
          const std::size_t idx = (x * s[1] + y) * s[2] + z;
          const double phi = m.values[owner[idx]];
          const double t = scale > 0.0 ? phi / scale : 0.0;
          const double g = std::clamp(volume.voxels[idx], 0.0, 1.0);
          doc.rect(tx + static_cast<double>(x) * cell, ty + static_cast<double>(y) * cell, cell, cell,
                   svg::gray(g));
          doc.rect(tx + static_cast<double>(x) * cell, ty + static_cast<double>(y) * cell, cell, cell,
                   svg::diverging(t), 0.5);
        }
    }
  }
  char caption[160];
  std::snprintf(caption, sizeof caption, "p(class 0) = %.4f, p(class 1) = %.4f, scale = +/-%.4g",
                1.0 - class1.target_value, class1.target_value, scale);
  doc.text(10, panel_h + 36, caption, 13);
  return doc.str();
}

}  // namespace voxbayes
