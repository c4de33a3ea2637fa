// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxbayes/autodiff.hpp"

namespace voxbayes {

using Extents3 = std::array<std::size_t, 3>;

enum class LayerKind { conv3d, maxpool3d, batchnorm, relu, dense, dropout, global_maxpool, sigmoid_head };
enum class BayesVariant { none, reparam, local_reparam, flipout, mnf };
enum class Head { sigmoid, bernoulli_mean };
enum class Activation { none, relu };

std::string to_string(LayerKind k);
std::string to_string(BayesVariant v);
std::string to_string(Head h);
BayesVariant parse_bayes_variant(const std::string& s);
Head parse_head(const std::string& s);
LayerKind parse_layer_kind(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  /// Bayesian replacement for conv3d / dense; `none` elsewhere.
  BayesVariant variant = BayesVariant::none;
  Activation activation = Activation::none;
  std::size_t filters = 0;  // conv3d filters or dense units
  std::size_t kernel = 3;
  std::size_t stride = 1;
  ad::Padding padding = ad::Padding::same;
  std::size_t pool = 2;
  double rate = 0.0;  // dropout

  /// e.g. "conv3d", "conv3d_mnf", "dense_flipout".
  std::string kind_name() const;
  bool is_bayesian() const { return variant != BayesVariant::none; }
};

struct NetworkSpec {
  Extents3 input_shape{32, 32, 16};
  std::vector<LayerSpec> layers;
  Head head = Head::sigmoid;
};

/// Width knobs of the reference network; the defaults are the tuned values.
struct ReferenceOptions {
  std::size_t filters = 128;
  std::size_t dense_units = 256;
  std::size_t kernel = 3;
  double dropout = 0.2;
};

/// Three [conv3d(relu) -> maxpool3d(2) -> batchnorm] blocks, global max pool,
/// dense(relu), dropout, dense(1) and the sigmoid head (14 layers). With a
/// Bayesian variant every conv3d and dense layer uses that variant.
NetworkSpec build_reference_model(const Extents3& input_shape, BayesVariant variant = BayesVariant::none,
                                  Head head = Head::sigmoid, const ReferenceOptions& options = {});

/// Per-sample output shape after every layer (batch axis excluded). The input
/// is (1,X,Y,Z). Throws ShapeError when a layer cannot accept its input.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

/// Plain-tensor conv3d: input (C,X,Y,Z), kernels (F,C,kx,ky,kz).
Tensor conv3d(const Tensor& input, const Tensor& kernels, std::size_t stride = 1,
              ad::Padding padding = ad::Padding::valid);
Tensor maxpool3d(const Tensor& input, std::size_t window);

enum class BatchNormMode { train, infer };

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;

  explicit BatchNormState(std::size_t channels = 1);
};

/// Per-channel normalisation of (B,C,...) input over batch and spatial axes.
/// Train mode uses batch moments (biased variance) and updates the running
/// statistics; infer mode uses the running statistics.
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
              BatchNormMode mode);

}  // namespace voxbayes
