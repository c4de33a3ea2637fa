// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxbayes/autodiff.hpp"
#include "voxbayes/flow.hpp"
#include "voxbayes/rng.hpp"

namespace voxbayes {

/// Factorised Gaussian over a weight tensor, sigma = softplus(rho).
/// Dense weights are stored (din, dout); conv kernels (F, C, kx, ky, kz).
struct GaussianPosterior {
  Var mu;
  Var rho;

  Var sigma() const;
};

/// He-normal means and rho chosen so that sigma == sigma0.
GaussianPosterior make_gaussian_posterior(const Shape& shape, std::size_t fan_in, Rng& rng,
                                          double sigma0 = 0.01);

/// rho with softplus(rho) == sigma.
double inverse_softplus(double sigma);

/// Auxiliary posterior r(z_K | w): z_K is pushed through `inverse_flow` and
/// scored under N(mu_t, sigma_t^2) with h = tanh(V c / P), mu_t = b1 * h,
/// sigma_t^2 = sigmoid(b2 * h), where V is the weight sample reshaped to
/// (D, P) along the z axis.
struct AuxPosterior {
  Var c;   // (P, 1)
  Var b1;  // (1, D)
  Var b2;  // (1, D)
  FlowStack inverse_flow;
};

/// The multiplicative latent z scales axis 0 of the weight: input units of a
/// dense layer, filters of a conv layer. q(z0) = N(z_mu, softplus(z_rho)^2).
struct MnfLayerParams {
  GaussianPosterior posterior;
  Var z_mu;   // (1, D)
  Var z_rho;  // (1, D)
  FlowStack flow;
  AuxPosterior aux;

  std::size_t z_dim() const { return flow.dim; }
  std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix) const;
};

struct MnfOptions {
  double sigma0 = 0.01;
  double z_sigma0 = 0.1;
  FlowOptions flow{};
};

MnfLayerParams make_mnf_params(const Shape& weight_shape, std::size_t fan_in, Rng& rng,
                               const MnfOptions& options = {});

/// Per-pass KL contributions keyed by layer id.
class KlLedger {
 public:
  /// Throws GraphError if `id` already contributed in this pass.
  void record(const std::string& id, Var kl);
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  /// Sum of all contributions as a scalar node (constant 0 when empty).
  Var total() const;
  /// Contribution values, for reporting.
  std::map<std::string, double> values() const;
  void clear() { entries_.clear(); }

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

/// w = mu + sigma * eps with eps ~ N(0, I).
Var sample_reparameterized(const GaussianPosterior& post, Rng& rng);
Var sample_reparameterized(const GaussianPosterior& post, const Tensor& eps);

/// sum 0.5 * (mu^2 + sigma^2 - 1 - ln sigma^2) against N(0, I).
Var kl_gaussian_vs_standard_normal(const GaussianPosterior& post);
/// Same with an arbitrary mean node and sigma = softplus(rho).
Var kl_normal_vs_standard_normal(const Var& mean, const Var& rho);

/// Dense forwards. input (B, din) -> (B, dout).
Var dense_forward(const Var& input, const Var& weights);
Var reparam_dense_forward(const Var& input, const GaussianPosterior& post, Rng& rng);
Var flipout_dense_forward(const Var& input, const GaussianPosterior& post, Rng& rng);
Var local_reparam_dense_forward(const Var& input, const GaussianPosterior& post, Rng& rng);
Var mnf_dense_forward(const Var& input, const MnfLayerParams& params, Rng& rng, KlLedger& ledger,
                      const std::string& id);

/// Conv forwards. input (B, C, X, Y, Z) -> (B, F, X', Y', Z').
Var reparam_conv3d_forward(const Var& input, const GaussianPosterior& post, Rng& rng,
                           ad::Conv3dOptions options);
Var flipout_conv3d_forward(const Var& input, const GaussianPosterior& post, Rng& rng,
                           ad::Conv3dOptions options);
Var local_reparam_conv3d_forward(const Var& input, const GaussianPosterior& post, Rng& rng,
                                 ad::Conv3dOptions options);
Var mnf_conv3d_forward(const Var& input, const MnfLayerParams& params, Rng& rng, KlLedger& ledger,
                       const std::string& id, ad::Conv3dOptions options);

/// Flipout conv with explicit noise: per example b the kernel is
/// mu + delta * (r_b outer s_b), r (B, F) and s (B, C) of +-1.
Var flipout_conv3d(const Var& input, const Var& mu, const Var& delta, const Tensor& r,
                   const Tensor& s, ad::Conv3dOptions options);
/// Flipout dense with explicit noise: x mu + ((x * s) delta) * r.
Var flipout_dense(const Var& input, const Var& mu, const Var& delta, const Tensor& r,
                  const Tensor& s);

/// One MNF draw: z0 -> z_K through the flow, then w ~ N(z_K * mu, sigma^2).
struct MnfDraw {
  Var z0;       // (1, D)
  Var zK;       // (1, D)
  Var log_det;  // (1,) forward log-det
  Var mean;     // z_K-scaled weight means
  Var weights;  // sampled weights
};

MnfDraw draw_mnf_weights(const MnfLayerParams& params, Rng& rng);
/// Explicit noise: z0 = z_mu + z_sigma * eps_z, w = mean + sigma * eps_w.
MnfDraw draw_mnf_weights(const MnfLayerParams& params, const Tensor& eps_z, const Tensor& eps_w);
/// Posterior-mean weights: eps_z = 0, eps_w = 0.
MnfDraw mnf_mean_weights(const MnfLayerParams& params);

/// Single-sample estimate of KL(q(w|z_K) || N(0,I)) + log q(z_K) - log r(z_K | w).
Var kl_mnf_bound(const MnfLayerParams& params, const Var& weights, const Var& z0, const Var& zK,
                 const Var& log_det_fwd);
/// log r(z_K | w) alone.
Var mnf_aux_log_density(const MnfLayerParams& params, const Var& weights, const Var& zK);
/// log q(z_K) = log N(z0; z_mu, z_sigma^2) - log_det_fwd.
Var mnf_log_qz(const MnfLayerParams& params, const Var& z0, const Var& log_det_fwd);

/// Inverted dropout that stays active at test time; rate in [0, 1).
Var mc_dropout_forward(const Var& input, double rate, Rng& rng);

}  // namespace voxbayes
