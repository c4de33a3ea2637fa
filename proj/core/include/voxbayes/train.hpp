// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "voxbayes/checkpoint.hpp"
#include "voxbayes/dataset.hpp"
#include "voxbayes/network.hpp"

namespace voxbayes {

inline constexpr double kProbabilityClamp = 1e-7;

/// Negative ELBO per datum: mean BCE over the batch plus ledger total / n_train.
/// Probabilities are clamped to [1e-7, 1 - 1e-7].
Var elbo_loss(const Var& probs, const Tensor& labels, const KlLedger& ledger, std::size_t n_train);

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update applied in place to the parameter leaves.
void adam_step(const std::vector<Var>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 10;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 15;
  bool augment = false;
  AugmentPolicy augment_policy{};
  /// Forward passes averaged per validation volume for the bernoulli_mean head.
  std::size_t validation_samples = 10;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best validation accuracy, earliest on ties
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const NetworkSpec& spec, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

Model model_from_checkpoint(const Checkpoint& checkpoint);

struct PredictConfig {
  /// Forward passes averaged by the bernoulli_mean head.
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  /// Volumes per forward in batched inference.
  std::size_t batch_size = 4;
};

/// Reported class-1 probability: one posterior-mean pass for the sigmoid head,
/// the mean of `samples` stochastic passes for the bernoulli_mean head.
double predict(Model& model, const Volume& volume, const PredictConfig& config = {});
std::vector<double> predict(Model& model, const std::vector<const Volume*>& volumes,
                            const PredictConfig& config = {});

/// T stochastic forwards; pass t draws from Rng(seed).derive(t).
/// ConfigError when the model has no stochastic layer or T == 0.
std::vector<double> predict_mc(Model& model, const Volume& volume, std::size_t samples,
                               std::uint64_t seed);

double accuracy_at(const std::vector<double>& probs, const std::vector<int>& labels,
                   double threshold = 0.5);

}  // namespace voxbayes
