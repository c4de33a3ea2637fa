// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voxbayes/autodiff.hpp"
#include "voxbayes/gradcheck.hpp"
#include "voxbayes/rng.hpp"
#include "voxbayes/volume.hpp"

namespace voxbayes::testing {

inline Tensor uniform_tensor(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Volume volume_of(Tensor voxels, std::string source = "") {
  Volume v;
  v.voxels = std::move(voxels);
  v.source = std::move(source);
  return v;
}

/// Reduces any node to a scalar through fixed random weights so every output
/// element carries a distinct upstream gradient.
inline Var weighted_sum(const Var& y, Rng& rng) {
  return ad::sum(ad::mul(y, constant(rng.normal_tensor(y->shape()))));
}

/// Worst relative error of backward against central differences over leaves.
inline double max_leaf_error(const Var& root, const std::vector<Var>& leaves, double h = 1e-5) {
  double worst = 0.0;
  for (const auto& leaf : leaves) worst = std::max(worst, check_leaf_gradient(root, leaf, h));
  return worst;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("voxbayes_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace voxbayes::testing
