// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "voxbayes/errors.hpp"

namespace voxbayes {

namespace {

void check_lengths(const char* op, std::size_t a, std::size_t b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion_counts(const std::vector<double>& probs, const std::vector<int>& labels,
                                 double threshold) {
  check_lengths("confusion_counts", probs.size(), labels.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  ClassificationMetrics m;
  m.accuracy = ratio(c.tp + c.tn, c.n());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double cohens_kappa(const ConfusionCounts& c) {
  const double n = static_cast<double>(c.n());
  if (n == 0.0) return 0.0;
  const double po = static_cast<double>(c.tp + c.tn) / n;
  const double pred1 = static_cast<double>(c.tp + c.fp) / n;
  const double true1 = static_cast<double>(c.tp + c.fn) / n;
  const double pe = pred1 * true1 + (1.0 - pred1) * (1.0 - true1);
  if (pe == 1.0) return 0.0;
  return (po - pe) / (1.0 - pe);
}

double cohens_kappa(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_lengths("cohens_kappa", preds.size(), labels.size());
  std::vector<double> as_probs(preds.begin(), preds.end());
  return cohens_kappa(confusion_counts(as_probs, labels, 0.5));
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_lengths("roc_auc", scores.size(), labels.size());
  // Rank-sum form of the pairwise count: sort once, tied groups share the midrank.
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::size_t pos = 0;
  for (int l : labels) pos += l == 1;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetric("roc_auc: labels contain a single class");
  // Count, for each positive, negatives strictly below plus half the tied ones (in half units).
  std::size_t twice_wins = 0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0, group_neg = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? group_pos : group_neg) += 1;
      ++j;
    }
    twice_wins += group_pos * (2 * negatives_below + group_neg);
    negatives_below += group_neg;
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsReport evaluate_metrics(const std::vector<double>& probs, const std::vector<int>& labels,
                               double threshold) {
  const ConfusionCounts c = confusion_counts(probs, labels, threshold);
  const ClassificationMetrics m = classification_metrics(c);
  MetricsReport r;
  r.threshold = threshold;
  r.accuracy = m.accuracy;
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;
  r.kappa = cohens_kappa(c);
  const bool both = std::find(labels.begin(), labels.end(), 0) != labels.end() &&
                    std::find(labels.begin(), labels.end(), 1) != labels.end();
  r.auc = both ? roc_auc(probs, labels) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace voxbayes
