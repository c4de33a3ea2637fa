// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbayes/layers.hpp"

namespace voxbayes::cli {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default. Empty default means "required by
/// the commands that use it".
const std::vector<ConfigKey>& config_keys();

/// Flat dotted-key configuration: defaults, then file values, then flags.
class RunConfig {
 public:
  RunConfig();

  /// ConfigError on unknown keys.
  void set(const std::string& key, const std::string& value);
  /// key=value lines with optional [section] headers and # comments, or a
  /// run manifest (JSON object with a "config" member).
  void load_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  /// ConfigError naming the key when the value is empty.
  const std::string& require(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;
  Extents3 get_extents(const std::string& key) const;

  nlohmann::json to_json() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace voxbayes::cli
