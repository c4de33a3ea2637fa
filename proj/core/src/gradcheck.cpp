// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "voxbayes/errors.hpp"

namespace voxbayes {

Tensor finite_difference_gradient(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_difference_gradient: step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericalError("finite_difference_gradient: non-finite evaluation at coordinate " +
                           std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("relative_error: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

double check_leaf_gradient(const Var& root, const Var& leaf, double h) {
  reset(root);
  forward(root);
  auto grads = backward(root);
  reset(root);
  auto it = grads.find(leaf.get());
  const Tensor analytic = it == grads.end() ? Tensor(leaf->shape(), 0.0) : it->second;

  const Tensor original = leaf->value();
  const Tensor numeric = finite_difference_gradient(
      [&](const Tensor& probe) {
        leaf->set_value(probe);
        return forward(root).item();
      },
      original, h);
  leaf->set_value(original);
  forward(root);
  return relative_error(analytic, numeric);
}

}  // namespace voxbayes
