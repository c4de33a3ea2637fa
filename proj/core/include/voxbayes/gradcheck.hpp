// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "voxbayes/autodiff.hpp"
#include "voxbayes/tensor.hpp"

namespace voxbayes {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate.
/// Throws NumericalError when f is non-finite at a probe point.
Tensor finite_difference_gradient(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// ||a - b||_2 / max(||a||_2, ||b||_2); zero when both are zero.
double relative_error(const Tensor& a, const Tensor& b);

/// Compares the backward gradient of `root` w.r.t. `leaf` with central
/// differences obtained by perturbing the leaf and re-running forward(root).
/// The graph is left with its original leaf value and a reset backward flag.
double check_leaf_gradient(const Var& root, const Var& leaf, double h = 1e-5);

}  // namespace voxbayes
