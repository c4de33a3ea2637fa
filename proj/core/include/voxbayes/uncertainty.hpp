// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voxbayes/network.hpp"

namespace voxbayes {

inline constexpr std::size_t kDefaultMcSamples = 200;
inline constexpr double kDefaultFlagWidth = 0.3;

/// T Monte-Carlo class-1 probabilities for one input.
struct PredictiveSamples {
  std::string id;
  std::optional<int> label;
  std::vector<double> samples;
  std::uint64_t seed = 0;
  std::string model_id;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct PredictiveInterval {
  double level = 0.95;
  Interval class1;
  Interval class0;  // (1 - hi1, 1 - lo1)
  double mean = 0.0;
  double width() const { return class1.width(); }
};

enum class UncertaintyFlag { not_flagged, flagged };

PredictiveSamples mc_predictive(Model& model, const Volume& volume, std::size_t samples, std::uint64_t seed,
                                const std::string& id = "", const std::string& model_id = "");

/// Linear-interpolation percentile of sorted data at rank q * (n - 1).
double percentile_sorted(const std::vector<double>& sorted, double q);

/// Percentiles at (1-level)/2 and 1-(1-level)/2; class 0 by complement.
PredictiveInterval predictive_interval(const std::vector<double>& samples, double level = 0.95);
PredictiveInterval predictive_interval(const PredictiveSamples& samples, double level = 0.95);

/// flagged iff width > threshold.
UncertaintyFlag flag_high_uncertainty(const PredictiveInterval& interval,
                                      double width_threshold = kDefaultFlagWidth);
std::string to_string(UncertaintyFlag f);

/// JSON array of {id, label?, samples, seed, model_id}.
std::string prediction_log_json(const std::vector<PredictiveSamples>& log);
std::vector<PredictiveSamples> parse_prediction_log(const std::string& text);

}  // namespace voxbayes
