// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "voxbayes/tensor.hpp"

namespace voxbayes {

/// Counter-based generator: draw i of a stream is a pure function of
/// (key, i), so results do not depend on thread scheduling or platform
/// library versions. Normals use Box-Muller on two uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// +1 or -1 with equal probability.
  double rademacher();
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Tensor normal_tensor(const Shape& shape);
  Tensor rademacher_tensor(const Shape& shape);

  /// Independent child stream keyed by `index`; does not advance this one.
  Rng derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace voxbayes
