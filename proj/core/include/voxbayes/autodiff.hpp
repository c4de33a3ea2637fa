// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "voxbayes/tensor.hpp"

namespace voxbayes {

class DiffNode;
using Var = std::shared_ptr<DiffNode>;

/// One node of a reverse-mode graph. Values are computed eagerly when a node
/// is built and can be recomputed from the leaves with `forward(root)`, so
/// leaf values may be changed in place for finite-difference probing.
class DiffNode {
 public:
  using Recompute = std::function<Tensor(const std::vector<Var>& parents)>;
  /// Reads `self.grad()` and accumulates into the parents' gradients.
  using Backprop = std::function<void(const DiffNode& self, const std::vector<Var>& parents)>;

  const Tensor& value() const noexcept { return value_; }
  const Shape& shape() const noexcept { return value_.shape(); }
  const std::string& op() const noexcept { return op_; }
  const std::vector<Var>& parents() const noexcept { return parents_; }
  bool requires_grad() const noexcept { return requires_grad_; }
  bool is_leaf() const noexcept { return parents_.empty(); }

  /// Accumulated gradient; zeros until a backward pass reaches this node.
  const Tensor& grad() const;

  /// Replace a leaf value. The shape must not change.
  void set_value(Tensor value);

  /// Add `g` into this node's gradient buffer (used by backprop rules).
  void accumulate_grad(const Tensor& g);
  /// Direct access to the gradient buffer; valid only during backward.
  std::span<double> grad_buffer();

 private:
  friend Var make_leaf(Tensor value, bool requires_grad, std::string op);
  friend Var make_op(std::string op, std::vector<Var> parents, Recompute recompute,
                     Backprop backprop);
  friend Tensor forward(const Var& root);
  friend std::unordered_map<const DiffNode*, Tensor> backward(const Var& root);
  friend void reset(const Var& root);

  void ensure_grad();

  Tensor value_;
  mutable Tensor grad_;
  mutable bool grad_ready_ = false;
  std::string op_;
  std::vector<Var> parents_;
  Recompute recompute_;
  Backprop backprop_;
  bool requires_grad_ = false;
  bool backward_done_ = false;
};

using GradientMap = std::unordered_map<const DiffNode*, Tensor>;

Var make_leaf(Tensor value, bool requires_grad, std::string op = "leaf");
/// Trainable leaf.
Var parameter(Tensor value);
/// Leaf that never receives a gradient.
Var constant(Tensor value);
Var constant(double v);

/// Build a primitive node. `recompute` runs immediately to produce the value.
Var make_op(std::string op, std::vector<Var> parents, DiffNode::Recompute recompute,
            DiffNode::Backprop backprop);

/// Re-evaluates every non-leaf node in topological order and returns the root
/// value. Two calls with unchanged leaves return identical tensors.
Tensor forward(const Var& root);

/// Gradient of a scalar root (shape [] or [1]) with respect to every leaf that
/// requires a gradient. Calling it twice without `reset` is a GraphError.
GradientMap backward(const Var& root);

/// Clears gradients and the backward-done flag over the graph of `root`.
void reset(const Var& root);

/// Nodes reachable from `root`, parents before children.
std::vector<DiffNode*> topological_order(const Var& root);

namespace ad {

enum class Padding { valid, same };

struct Conv3dOptions {
  std::size_t stride = 1;
  Padding padding = Padding::valid;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var shift(const Var& a, double c);
Var square(const Var& a);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var sigmoid(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);
Var sqrt(const Var& a);
Var clamp(const Var& a, double lo, double hi);

Var sum(const Var& a);
Var mean(const Var& a);

/// Numpy-style broadcast (right-aligned, size-1 axes expand).
Var broadcast_to(const Var& a, const Shape& shape);
Var reshape(const Var& a, const Shape& shape);

/// Cross-correlation. `x` is (C,X,Y,Z) or (B,C,X,Y,Z); `w` is (F,C,kx,ky,kz).
Var conv3d(const Var& x, const Var& w, Conv3dOptions options = {});
/// Max pooling with stride equal to the window; trailing remainders are dropped.
/// Gradient goes to the first maximum in scan order.
Var maxpool3d(const Var& x, std::array<std::size_t, 3> window);

}  // namespace ad

namespace kernels {

/// Output extent and low-side padding of one convolution axis.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_lo = 0;
};

AxisGeometry conv_axis(std::size_t extent, std::size_t kernel, std::size_t stride,
                       ad::Padding padding);

/// Single-sample forward: x (C,X,Y,Z) flat, w (F,C,k..) flat, y (F,X',Y',Z') flat.
struct ConvGeometry {
  std::size_t channels = 0, filters = 0;
  std::array<std::size_t, 3> in{}, kernel{};
  std::array<AxisGeometry, 3> axis{};
  std::size_t stride = 1;

  std::size_t patch() const { return channels * kernel[0] * kernel[1] * kernel[2]; }
  std::size_t out_voxels() const { return axis[0].out * axis[1].out * axis[2].out; }
  std::size_t in_voxels() const { return in[0] * in[1] * in[2]; }
};

/// Worker threads used by the BLAS backend (1 keeps results bit-reproducible
/// across machines with different core counts).
void set_num_threads(int threads);

ConvGeometry conv_geometry(const Shape& sample_shape, const Shape& kernel_shape,
                           ad::Conv3dOptions options);
void conv3d_forward(const ConvGeometry& g, const double* x, const double* w, double* y,
                    std::vector<double>& scratch);
/// Accumulates into dw (if non-null) and dx (if non-null).
void conv3d_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy,
                     double* dw, double* dx, std::vector<double>& scratch);

}  // namespace kernels

}  // namespace voxbayes
