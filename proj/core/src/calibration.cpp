// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "voxbayes/errors.hpp"
#include "voxbayes/svg.hpp"

namespace voxbayes {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::size_t bin_of(double conf, std::size_t m) {
  const double md = static_cast<double>(m);
  auto b = static_cast<std::size_t>(std::max(1.0, std::ceil(conf * md)));
  b = std::min(b, m);
  // Pin the index to the interval definition ((b-1)/M, b/M] under rounding.
  while (b > 1 && conf <= static_cast<double>(b - 1) / md) --b;
  while (b < m && conf > static_cast<double>(b) / md) ++b;
  return b;
}

}  // namespace

std::vector<CalibrationBin> bin_predictions(const std::vector<double>& probs, const std::vector<int>& labels,
                                            double threshold, std::size_t m) {
  if (probs.size() != labels.size()) {
    throw ShapeError("bin_predictions: length mismatch " + std::to_string(probs.size()) + " vs " +
                     std::to_string(labels.size()));
  }
  if (m < 2) throw ConfigError("bin_predictions: need at least 2 bins");
  std::vector<CalibrationBin> bins(m);
  std::vector<double> correct(m, 0.0), conf_sum(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) bins[i].index = i + 1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("bin_predictions: probability outside [0, 1]");
    const double conf = std::max(p, 1.0 - p);
    const int pred = p >= threshold ? 1 : 0;
    const std::size_t b = bin_of(conf, m) - 1;
    bins[b].count += 1;
    correct[b] += pred == labels[i] ? 1.0 : 0.0;
    conf_sum[b] += conf;
  }
  for (std::size_t b = 0; b < m; ++b) {
    if (bins[b].count == 0) continue;
    const double c = static_cast<double>(bins[b].count);
    bins[b].accuracy = correct[b] / c;
    bins[b].confidence = conf_sum[b] / c;
  }
  return bins;
}

double expected_calibration_error(const std::vector<CalibrationBin>& bins, std::size_t n) {
  if (n == 0) throw UndefinedMetric("expected_calibration_error: no samples");
  double ece = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    ece += static_cast<double>(b.count) / static_cast<double>(n) * std::abs(b.accuracy - b.confidence);
  }
  return ece;
}

CalibrationReport calibration_report(const std::vector<double>& probs, const std::vector<int>& labels,
                                     double threshold, std::size_t m) {
  CalibrationReport r;
  r.bins = bin_predictions(probs, labels, threshold, m);
  r.n = probs.size();
  r.threshold = threshold;
  r.ece = expected_calibration_error(r.bins, r.n);
  return r;
}

std::string reliability_diagram(const CalibrationReport& report) {
  const double left = 60, top = 20, size = 320, strip = 40;
  svg::Document doc(left + size + 30, top + size + strip + 70);
  doc.rect(left, top, size, size, "#ffffff", 1.0, "#333333");
  const double m = static_cast<double>(report.bins.size());
  const double bw = size / m;
  std::size_t max_count = 0;
  for (const auto& b : report.bins) max_count = std::max(max_count, b.count);

  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const auto& b = report.bins[i];
    const double x = left + static_cast<double>(i) * bw;
    if (b.count > 0) {
      const double acc_h = b.accuracy * size;
      doc.rect(x, top + size - acc_h, bw, acc_h, "#3b6fb6", 1.0, "#1f3d66");
      const double lo = std::min(b.accuracy, b.confidence);
      const double hi = std::max(b.accuracy, b.confidence);
      doc.rect(x, top + size - hi * size, bw, (hi - lo) * size, "#d62728", 0.5);
      const double hist_h = strip * static_cast<double>(b.count) / static_cast<double>(max_count);
      doc.rect(x, top + size + 10 + strip - hist_h, bw, hist_h, "#7f7f7f");
    }
  }
  doc.line(left, top + size, left + size, top, "#555555", 1.0, "4 3");
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    doc.text(left - 6, top + size - v * size + 4, svg::num(v), 10, "end");
    doc.text(left + v * size, top + size + strip + 26, svg::num(v), 10, "middle");
  }
  doc.text(left + size / 2, top + size + strip + 42, "confidence", 12, "middle");
  char caption[64];
  std::snprintf(caption, sizeof caption, "ECE = %.3f (n = %zu, %zu bins)", report.ece, report.n,
                report.bins.size());
  doc.text(left + size / 2, top + size + strip + 62, caption, 13, "middle");
  return doc.str();
}

std::string reliability_csv(const CalibrationReport& report) {
  std::string out = "bin,lower,upper,count,accuracy,confidence\n";
  const double m = static_cast<double>(report.bins.size());
  for (const auto& b : report.bins) {
    out += std::to_string(b.index) + "," + fmt(static_cast<double>(b.index - 1) / m) + "," +
           fmt(static_cast<double>(b.index) / m) + "," + std::to_string(b.count) + "," + fmt(b.accuracy) +
           "," + fmt(b.confidence) + "\n";
  }
  return out;
}

std::vector<double> default_thresholds() { return {0.4, 0.5, 0.6, 0.7, 0.8}; }

std::vector<SweepRow> threshold_sweep(const std::vector<double>& probs, const std::vector<int>& labels,
                                      const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ConfigError("threshold_sweep: empty threshold list");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
      throw ConfigError("threshold_sweep: thresholds must lie in (0, 1)");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw ConfigError("threshold_sweep: thresholds must be strictly increasing");
    }
  }
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    SweepRow row;
    row.metrics = evaluate_metrics(probs, labels, t);
    row.ece = calibration_report(probs, labels, t).ece;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "threshold,accuracy,precision,recall,f1,kappa,auc,ece\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += fmt(m.threshold) + "," + fmt(m.accuracy) + "," + fmt(m.precision) + "," + fmt(m.recall) + "," +
           fmt(m.f1) + "," + fmt(m.kappa) + "," + fmt(m.auc) + "," + fmt(r.ece) + "\n";
  }
  return out;
}

}  // namespace voxbayes
