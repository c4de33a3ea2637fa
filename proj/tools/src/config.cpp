// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "voxbayes/errors.hpp"

namespace voxbayes::cli {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"seed", "0", "master seed for splits, initialisation and sampling"},
      {"threads", "1", "BLAS worker threads"},
      {"data.manifest", "", "CSV with columns path,source_class (prepare input)"},
      {"data.dir", "", "prepared dataset directory"},
      {"checkpoint", "", "checkpoint directory written by train"},
      {"prepare.hu_window", "W4", "HU window id W1..W4"},
      {"prepare.split", "0.7,0.2,0.1", "train,test,validation ratios"},
      {"model.variant", "none", "none|reparam|local_reparam|flipout|mnf"},
      {"model.head", "sigmoid", "sigmoid|bernoulli_mean"},
      {"model.filters", "128", "conv filters per block"},
      {"model.dense_units", "256", "hidden dense width"},
      {"model.kernel", "3", "conv kernel extent"},
      {"model.dropout", "0.2", "dropout rate"},
      {"train.learning_rate", "0.001", "Adam learning rate"},
      {"train.epochs", "10", "maximum epochs"},
      {"train.batch_size", "2", "batch size"},
      {"train.patience", "15", "early-stop patience on validation accuracy"},
      {"train.augment", "false", "rotate/flip/noise augmentation"},
      {"train.noise_sigma", "0.01", "augmentation noise"},
      {"train.max_angle", "20", "augmentation rotation limit in degrees"},
      {"train.validation_samples", "10", "MC passes per validation volume (bernoulli_mean head)"},
      {"predict.samples", "200", "MC passes averaged by the bernoulli_mean head"},
      {"eval.split", "test", "train|test|validation|holdout"},
      {"eval.thresholds", "0.4,0.5,0.6,0.7,0.8", "threshold grid"},
      {"calibration.bins", "10", "reliability bins"},
      {"calibration.threshold", "0.5", "decision threshold for correctness"},
      {"mc.samples", "200", "stochastic forwards per input"},
      {"mc.level", "0.95", "interval level"},
      {"mc.flag_width", "0.3", "flag intervals wider than this"},
      {"shap.grid", "8x8x4", "patch grid"},
      {"shap.mode", "sampled", "exact|sampled"},
      {"shap.permutations", "16", "permutations for the sampled estimator"},
      {"shap.index", "0", "index of the explained volume within eval.split"},
      {"synth.n", "200", "number of synthetic volumes"},
      {"synth.shape", "32x32x16", "synthetic volume shape"},
      {"synth.noise_sigma", "0.05", "background noise"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  if (trim(text).starts_with("{")) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    const auto& cfg = j.contains("config") ? j.at("config") : j;
    for (const auto& [k, v] : cfg.items()) set(k, v.is_string() ? v.get<std::string>() : v.dump());
    return;
  }
  std::string section;
  std::size_t lineno = 0;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

const std::string& RunConfig::require(const std::string& key) const {
  const auto& v = get(key);
  if (v.empty()) throw ConfigError("missing required config value '" + key + "'");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config '" + key + "': expected a number, got '" + s + "'");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto& s = get(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config '" + key + "': expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("config '" + key + "': expected true/false, got '" + s + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split(get(key), ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("config '" + key + "': bad number '" + part + "'");
    }
  }
  return out;
}

Extents3 RunConfig::get_extents(const std::string& key) const {
  const auto parts = split(get(key), 'x');
  Extents3 e{};
  bool ok = parts.size() == 3;
  for (std::size_t i = 0; ok && i < 3; ++i) {
    auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), e[i]);
    ok = ec == std::errc() && ptr == parts[i].data() + parts[i].size() && e[i] > 0;
  }
  if (!ok) throw ConfigError("config '" + key + "': expected XxYxZ, got '" + get(key) + "'");
  return e;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

}  // namespace voxbayes::cli
