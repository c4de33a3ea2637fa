// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations written independently of the library code paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <numbers>
#include <vector>

#include "voxbayes/bayes.hpp"
#include "voxbayes/calibration.hpp"
#include "voxbayes/flow.hpp"

namespace voxbayes::oracle {

/// Per-bin (count, accuracy, confidence) by scanning every sample against
/// every bin's half-open interval.
inline std::vector<CalibrationBin> brute_bins(const std::vector<double>& probs, const std::vector<int>& labels,
                                              double threshold, std::size_t M) {
  std::vector<CalibrationBin> out(M);
  for (std::size_t m = 1; m <= M; ++m) {
    const double lo = static_cast<double>(m - 1) / static_cast<double>(M);
    const double hi = static_cast<double>(m) / static_cast<double>(M);
    double hits = 0.0, conf = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double p = probs[i];
      const double c = p > 1.0 - p ? p : 1.0 - p;
      const bool inside = (c > lo && c <= hi) || (m == 1 && c == 0.0);
      if (!inside) continue;
      ++count;
      const int predicted = p >= threshold ? 1 : 0;
      hits += predicted == labels[i] ? 1.0 : 0.0;
      conf += c;
    }
    out[m - 1].index = m;
    out[m - 1].count = count;
    out[m - 1].accuracy = count ? hits / count : 0.0;
    out[m - 1].confidence = count ? conf / count : 0.0;
  }
  return out;
}

inline double brute_ece(const std::vector<double>& probs, const std::vector<int>& labels, double threshold,
                        std::size_t M) {
  double e = 0.0;
  for (const auto& b : brute_bins(probs, labels, threshold, M)) {
    e += static_cast<double>(b.count) / static_cast<double>(probs.size()) * std::abs(b.accuracy - b.confidence);
  }
  return e;
}

/// Mann-Whitney AUC by explicit pair enumeration: wins + ties/2 over all
/// positive-negative pairs.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

/// Gauss-Hermite nodes and weights for integrals against exp(-x^2), by
/// Newton iteration on the Hermite recurrence.
inline void gauss_hermite(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  const std::size_t m = (n + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-14) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
}

/// True KL(q(w) || N(0, I)) for a dense MNF layer with two weights (din = 2,
/// dout = 1): q(w) = E_{z0}[N(w; zK * mu, sigma^2)] is evaluated by tensor
/// Gauss-Hermite quadrature over z0, and the outer KL integral by the
/// trapezoid rule on a grid in w.
inline double mnf_two_weight_true_kl(const MnfLayerParams& params, std::size_t hermite = 48,
                                     std::size_t grid = 401) {
  const auto mu = params.posterior.mu->value();
  const auto sigma = params.posterior.sigma()->value();
  const auto zmu = params.z_mu->value();
  Tensor zs = ad::softplus(params.z_rho)->value();

  std::vector<double> gx, gw;
  gauss_hermite(hermite, gx, gw);
  const std::size_t nodes = hermite * hermite;
  Tensor z0({nodes, 2});
  std::vector<double> node_w(nodes);
  for (std::size_t a = 0; a < hermite; ++a)
    for (std::size_t b = 0; b < hermite; ++b) {
      const std::size_t k = a * hermite + b;
      z0[2 * k] = zmu[0] + std::sqrt(2.0) * zs[0] * gx[a];
      z0[2 * k + 1] = zmu[1] + std::sqrt(2.0) * zs[1] * gx[b];
      node_w[k] = gw[a] * gw[b] / std::numbers::pi;
    }
  const Tensor zk = flow_forward(constant(z0), params.flow).z->value();
  std::vector<double> m0(nodes), m1(nodes);
  double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
  for (std::size_t k = 0; k < nodes; ++k) {
    m0[k] = zk[2 * k] * mu[0];
    m1[k] = zk[2 * k + 1] * mu[1];
    if (node_w[k] < 1e-14) continue;
    lo0 = std::min(lo0, m0[k]);
    hi0 = std::max(hi0, m0[k]);
    lo1 = std::min(lo1, m1[k]);
    hi1 = std::max(hi1, m1[k]);
  }
  lo0 -= 9 * sigma[0];
  hi0 += 9 * sigma[0];
  lo1 -= 9 * sigma[1];
  hi1 += 9 * sigma[1];
  const double h0 = (hi0 - lo0) / (grid - 1), h1 = (hi1 - lo1) / (grid - 1);
  const double c0 = 1.0 / (std::sqrt(2 * std::numbers::pi) * sigma[0]);
  const double c1 = 1.0 / (std::sqrt(2 * std::numbers::pi) * sigma[1]);

  std::vector<double> g0(nodes * grid), g1(nodes * grid);
  for (std::size_t k = 0; k < nodes; ++k)
    for (std::size_t i = 0; i < grid; ++i) {
      const double w0 = lo0 + h0 * i, w1 = lo1 + h1 * i;
      g0[k * grid + i] = c0 * std::exp(-0.5 * std::pow((w0 - m0[k]) / sigma[0], 2));
      g1[k * grid + i] = c1 * std::exp(-0.5 * std::pow((w1 - m1[k]) / sigma[1], 2));
    }

  double kl = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double w0 = lo0 + h0 * i;
    const double ti = (i == 0 || i + 1 == grid) ? 0.5 : 1.0;
    for (std::size_t j = 0; j < grid; ++j) {
      const double w1 = lo1 + h1 * j;
      double q = 0.0;
      for (std::size_t k = 0; k < nodes; ++k) q += node_w[k] * g0[k * grid + i] * g1[k * grid + j];
      if (q <= 1e-300) continue;
      const double log_p = -std::log(2 * std::numbers::pi) - 0.5 * (w0 * w0 + w1 * w1);
      const double tj = (j == 0 || j + 1 == grid) ? 0.5 : 1.0;
      kl += ti * tj * q * (std::log(q) - log_p);
    }
  }
  return kl * h0 * h1;
}

/// Shapley values as the average marginal contribution over all n! player
/// orderings. `value` maps a coalition membership vector to a payoff.
inline std::vector<double> ordering_shapley(const std::function<double(const std::vector<bool>&)>& value,
                                            std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    std::vector<bool> in(n, false);
    double prev = value(in);
    for (std::size_t i : order) {
      in[i] = true;
      const double next = value(in);
      phi[i] += next - prev;
      prev = next;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : phi) v /= count;
  return phi;
}

}  // namespace voxbayes::oracle
