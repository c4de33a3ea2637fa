// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxbayes/bayes.hpp"
#include "voxbayes/layers.hpp"
#include "voxbayes/volume.hpp"

namespace voxbayes {

/// train: stochastic layers, dropout, batch statistics, KL recorded.
/// infer: posterior means, no dropout, running statistics.
/// sample: stochastic layers and dropout with running statistics.
enum class ForwardMode { train, infer, sample };

/// Trainable state of one layer. Which members are set depends on the kind.
struct LayerParams {
  Var weights;  // deterministic conv3d / dense
  Var bias;     // conv3d / dense, point estimate for every variant
  GaussianPosterior posterior;
  MnfLayerParams mnf;
  Var gamma, beta;  // batchnorm
  BatchNormState bn;
};

class Model {
 public:
  explicit Model(NetworkSpec spec, std::uint64_t seed = 0);

  const NetworkSpec& spec() const noexcept { return spec_; }
  bool is_bayesian() const;
  /// True when sample-mode forwards are random (Bayesian layers or dropout).
  bool is_stochastic() const;

  /// input (B, 1, X, Y, Z) -> class-1 probabilities (B,). In train mode every
  /// Bayesian layer records its KL into `ledger` (required then).
  Var forward(const Var& input, ForwardMode mode, Rng& rng, KlLedger* ledger = nullptr);

  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::vector<Var> parameters() const;
  /// Parameters and batchnorm running statistics by name.
  std::map<std::string, Tensor> state() const;
  /// Shapes must match exactly; missing or extra names are a FormatError.
  void load_state(const std::map<std::string, Tensor>& state);

 private:
  Var apply_layer(std::size_t index, const Var& x, ForwardMode mode, Rng& rng, KlLedger* ledger);

  NetworkSpec spec_;
  std::vector<LayerParams> layers_;
};

/// Stacks volumes of equal shape into (B, 1, X, Y, Z).
Tensor stack_volumes(const std::vector<const Volume*>& volumes);

}  // namespace voxbayes
