// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "voxbayes/metrics.hpp"

namespace voxbayes {

struct CalibrationBin {
  std::size_t index = 0;  // 1..M, covers ((index-1)/M, index/M]
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  std::size_t n = 0;
  double threshold = 0.5;
};

/// Confidence max(p, 1-p), correctness by the >= threshold rule; a
/// confidence of exactly 0 goes to bin 1.
std::vector<CalibrationBin> bin_predictions(const std::vector<double>& probs, const std::vector<int>& labels,
                                            double threshold = 0.5, std::size_t bins = 10);
/// sum_m |B_m|/n * |acc - conf|; UndefinedMetric when n == 0.
double expected_calibration_error(const std::vector<CalibrationBin>& bins, std::size_t n);

CalibrationReport calibration_report(const std::vector<double>& probs, const std::vector<int>& labels,
                                     double threshold = 0.5, std::size_t bins = 10);

/// SVG 1.1 reliability diagram: diagonal, accuracy bars, red gap overlays,
/// confidence histogram strip and an "ECE = x.xxx" caption.
std::string reliability_diagram(const CalibrationReport& report);
/// bin,lower,upper,count,accuracy,confidence
std::string reliability_csv(const CalibrationReport& report);

struct SweepRow {
  MetricsReport metrics;
  double ece = 0.0;
};

std::vector<double> default_thresholds();
/// One row per threshold; thresholds must be in (0, 1) and strictly increasing.
std::vector<SweepRow> threshold_sweep(const std::vector<double>& probs, const std::vector<int>& labels,
                                      const std::vector<double>& thresholds = default_thresholds());
/// threshold,accuracy,precision,recall,f1,kappa,auc,ece
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace voxbayes
