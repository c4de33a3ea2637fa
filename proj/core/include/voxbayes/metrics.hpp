// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace voxbayes {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double threshold = 0.5;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double kappa = 0.0;
  double auc = 0.0;
};

/// Predicted positive iff prob >= threshold.
ConfusionCounts confusion_counts(const std::vector<double>& probs, const std::vector<int>& labels,
                                 double threshold);
/// Precision, recall and F1 are 0 when their denominators are 0.
ClassificationMetrics classification_metrics(const ConfusionCounts& c);
/// (p_o - p_e) / (1 - p_e); 0 when p_e == 1.
double cohens_kappa(const std::vector<int>& preds, const std::vector<int>& labels);
double cohens_kappa(const ConfusionCounts& c);
/// Mann-Whitney AUC with ties counted 1/2. UndefinedMetric for single-class labels.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// auc is NaN when the labels hold a single class.
MetricsReport evaluate_metrics(const std::vector<double>& probs, const std::vector<int>& labels,
                               double threshold);

}  // namespace voxbayes
