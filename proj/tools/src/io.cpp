// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "io.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

#include "voxbayes/errors.hpp"
#include "voxbayes/nifti.hpp"

namespace voxbayes::cli {

namespace {

std::vector<std::uint8_t> gunzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw FormatError(path.string() + ": corrupt gzip stream");
  return out;
}

}  // namespace

Volume read_volume(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  if (name.size() > 3 && name.ends_with(".gz")) {
    const auto bytes = gunzip(path);
    return parse_nifti(bytes, path.string()).volume;
  }
  return read_nifti(path).volume;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_dataset_index(const std::filesystem::path& dir, const std::vector<PreparedEntry>& entries) {
  std::string out = "path,source_class,split\n";
  for (const auto& e : entries) out += e.path + "," + to_string(e.source_class) + "," + e.split + "\n";
  write_text(dir / kDatasetIndex, out);
}

std::vector<PreparedEntry> read_dataset_index(const std::filesystem::path& dir) {
  std::istringstream lines(read_text(dir / kDatasetIndex));
  std::string line;
  if (!std::getline(lines, line) || line != "path,source_class,split") {
    throw FormatError((dir / kDatasetIndex).string() + ": expected header path,source_class,split");
  }
  std::vector<PreparedEntry> out;
  std::size_t lineno = 1;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) {
      throw FormatError((dir / kDatasetIndex).string() + ":" + std::to_string(lineno) + ": expected 3 columns");
    }
    PreparedEntry e;
    e.path = line.substr(0, a);
    e.source_class = parse_source_class(line.substr(a + 1, b - a - 1));
    e.split = line.substr(b + 1);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<LabeledSample> load_split(const std::filesystem::path& dir, const std::string& split) {
  if (split != "train" && split != "test" && split != "validation" && split != "holdout") {
    throw ConfigError("unknown split '" + split + "'");
  }
  std::vector<LabeledSample> out;
  for (const auto& e : read_dataset_index(dir)) {
    if (e.split != split) continue;
    LabeledSample s;
    s.volume = read_volume(dir / e.path);
    s.volume.source = std::filesystem::path(e.path).stem().string();
    s.source_class = e.source_class;
    s.label = label_for(e.source_class);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace voxbayes::cli
