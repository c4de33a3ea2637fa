// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "voxbayes/autodiff.hpp"
#include "voxbayes/rng.hpp"

namespace voxbayes {

/// Affine coupling z' = z * exp(s(m*z)) + t(m*z) on the unmasked coordinates.
/// Both nets are dense(dim->hidden, tanh) -> dense(hidden->dim); the scale
/// output goes through tanh so log-scales stay in (-1, 1).
struct CouplingStep {
  Tensor mask;  // (1, dim), 1 = passed through unchanged
  Var scale_w1, scale_b1, scale_w2, scale_b2;
  Var shift_w1, shift_b1, shift_w2, shift_b2;

  std::vector<Var> parameters() const;
};

struct FlowStack {
  std::size_t dim = 0;
  std::vector<CouplingStep> steps;

  std::vector<Var> parameters() const;
  std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix) const;
};

struct FlowOptions {
  std::size_t steps = 2;
  std::size_t hidden = 16;
  /// Std-dev of the first-layer weights.
  double input_scale = 0.1;
  /// Std-dev of the output-layer weights and biases; 0 gives an identity flow.
  double output_scale = 0.0;
};

/// Alternating masks flipped every step. A 1-D flow has mask 0 on every step,
/// which reduces each coupling to an affine map driven by the output biases.
FlowStack make_flow(std::size_t dim, Rng& rng, const FlowOptions& options = {});

struct FlowResult {
  Var z;        // (B, dim)
  Var log_det;  // (B,) : sum of log|det J| over steps for each row
};

/// z: (dim) or (B, dim). Applies f_K o ... o f_1.
FlowResult flow_forward(const Var& z, const FlowStack& flow);
/// Exact inverse; log_det is log|det| of the inverse map (= minus forward's).
FlowResult flow_inverse(const Var& z, const FlowStack& flow);

/// log N(z0; 0, I) + log|det d f^{-1}/d zK|, one value per row.
Var flow_log_density(const Var& zK, const FlowStack& flow);

/// Sum over the last axis of a (B, D) matrix, giving (B,).
Var row_sum(const Var& m);
/// Row-wise log N(x; mean, var) summed over the last axis; all (B, D).
Var gaussian_log_density_rows(const Var& x, const Var& mean, const Var& var);

}  // namespace voxbayes
