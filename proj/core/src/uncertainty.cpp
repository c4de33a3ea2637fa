// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "voxbayes/errors.hpp"
#include "voxbayes/train.hpp"

namespace voxbayes {

using nlohmann::json;

PredictiveSamples mc_predictive(Model& model, const Volume& volume, std::size_t samples, std::uint64_t seed,
                                const std::string& id, const std::string& model_id) {
  PredictiveSamples out;
  out.id = id;
  out.seed = seed;
  out.model_id = model_id;
  out.samples = predict_mc(model, volume, samples, seed);
  return out;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ConfigError("percentile: no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("percentile: q must lie in [0, 1]");
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

PredictiveInterval predictive_interval(const std::vector<double>& samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("predictive_interval: level must lie in (0, 1)");
  if (samples.empty()) throw ConfigError("predictive_interval: no samples");
  std::vector<double> sorted = samples;
  for (double s : sorted) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("predictive_interval: sample outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());
  const double tail = (1.0 - level) / 2.0;
  PredictiveInterval r;
  r.level = level;
  r.class1 = {percentile_sorted(sorted, tail), percentile_sorted(sorted, 1.0 - tail)};
  r.class0 = {1.0 - r.class1.hi, 1.0 - r.class1.lo};
  r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  return r;
}

PredictiveInterval predictive_interval(const PredictiveSamples& samples, double level) {
  return predictive_interval(samples.samples, level);
}

UncertaintyFlag flag_high_uncertainty(const PredictiveInterval& interval, double width_threshold) {
  return interval.width() > width_threshold ? UncertaintyFlag::flagged : UncertaintyFlag::not_flagged;
}

std::string to_string(UncertaintyFlag f) { return f == UncertaintyFlag::flagged ? "flagged" : "not_flagged"; }

std::string prediction_log_json(const std::vector<PredictiveSamples>& log) {
  json arr = json::array();
  for (const auto& p : log) {
    json j{{"id", p.id}, {"samples", p.samples}, {"seed", p.seed}, {"model_id", p.model_id}};
    if (p.label) j["label"] = *p.label;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<PredictiveSamples> parse_prediction_log(const std::string& text) {
  std::vector<PredictiveSamples> out;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw FormatError("prediction log: expected a JSON array");
    for (const auto& j : arr) {
      PredictiveSamples p;
      p.id = j.at("id").get<std::string>();
      if (j.contains("label") && !j.at("label").is_null()) p.label = j.at("label").get<int>();
      p.samples = j.at("samples").get<std::vector<double>>();
      p.seed = j.at("seed").get<std::uint64_t>();
      p.model_id = j.at("model_id").get<std::string>();
      if (p.samples.empty()) throw FormatError("prediction log: entry '" + p.id + "' has no samples");
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("prediction log: ") + e.what());
  }
  return out;
}

}  // namespace voxbayes
