// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "voxbayes/errors.hpp"

namespace voxbayes {

SourceClass parse_source_class(const std::string& text) {
  static const std::array<std::string, 5> names{"CT-0", "CT-1", "CT-2", "CT-3", "CT-4"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (text == names[i]) return static_cast<SourceClass>(i);
  }
  throw FormatError("unknown source class '" + text + "' (expected CT-0..CT-4)");
}

std::string to_string(SourceClass c) { return "CT-" + std::to_string(static_cast<int>(c)); }

int label_for(SourceClass c) { return c == SourceClass::ct0 ? 0 : 1; }

bool is_held_out(SourceClass c) { return c == SourceClass::ct1 || c == SourceClass::ct4; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open manifest " + csv.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,source_class") {
    throw FormatError("manifest " + csv.string() + " must start with header 'path,source_class'");
  }
  std::vector<ManifestEntry> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw FormatError(csv.string() + ":" + std::to_string(line_no) + ": expected path,source_class");
    }
    ManifestEntry e;
    std::filesystem::path p = trim(line.substr(0, comma));
    if (p.is_relative()) p = csv.parent_path() / p;
    e.path = p.lexically_normal().string();
    e.source_class = parse_source_class(trim(line.substr(comma + 1)));
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& csv, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(csv);
  if (!out) throw IoError("cannot write manifest " + csv.string());
  out << "path,source_class\n";
  for (const auto& e : entries) out << e.path << ',' << to_string(e.source_class) << '\n';
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  if (n == 0) throw ConfigError("split_dataset: empty input");
  if (n < 3) throw ConfigError("split_dataset: need at least 3 samples, got " + std::to_string(n));
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split_dataset: ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split_dataset: ratios must sum to 1");

  std::array<std::size_t, 3> sizes{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // the epsilon absorbs representation error such as 0.7 * 10 = 7.000000000000001
    sizes[i] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[i] + 1e-9));
    used += sizes[i];
  }
  sizes[0] += n - used;
  for (std::size_t i = 0; i < 3; ++i) {
    while (sizes[i] == 0) {
      const auto donor = static_cast<std::size_t>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      --sizes[donor];
      ++sizes[i];
    }
  }
  return sizes;
}

SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, Rng& rng) {
  const auto sizes = split_sizes(n, ratios);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  SplitIndices out;
  auto it = order.begin();
  out.train.assign(it, it + static_cast<long>(sizes[0]));
  it += static_cast<long>(sizes[0]);
  out.test.assign(it, it + static_cast<long>(sizes[1]));
  it += static_cast<long>(sizes[1]);
  out.validation.assign(it, order.end());
  return out;
}

}  // namespace voxbayes
