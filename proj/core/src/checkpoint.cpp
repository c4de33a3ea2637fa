// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "voxbayes/errors.hpp"

namespace voxbayes {

using nlohmann::json;

namespace {

json layer_to_json(const LayerSpec& l) {
  return json{{"kind", to_string(l.kind)},
              {"variant", to_string(l.variant)},
              {"activation", l.activation == Activation::relu ? "relu" : "none"},
              {"filters", l.filters},
              {"kernel", l.kernel},
              {"stride", l.stride},
              {"padding", l.padding == ad::Padding::same ? "same" : "valid"},
              {"pool", l.pool},
              {"rate", l.rate}};
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  l.kind = parse_layer_kind(j.at("kind").get<std::string>());
  l.variant = parse_bayes_variant(j.at("variant").get<std::string>());
  const auto act = j.at("activation").get<std::string>();
  if (act != "relu" && act != "none") throw FormatError("unknown activation '" + act + "'");
  l.activation = act == "relu" ? Activation::relu : Activation::none;
  l.filters = j.at("filters").get<std::size_t>();
  l.kernel = j.at("kernel").get<std::size_t>();
  l.stride = j.at("stride").get<std::size_t>();
  const auto pad = j.at("padding").get<std::string>();
  if (pad != "same" && pad != "valid") throw FormatError("unknown padding '" + pad + "'");
  l.padding = pad == "same" ? ad::Padding::same : ad::Padding::valid;
  l.pool = j.at("pool").get<std::size_t>();
  l.rate = j.at("rate").get<double>();
  return l;
}

json spec_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
  return json{{"input_shape", spec.input_shape}, {"head", to_string(spec.head)}, {"layers", layers}};
}

NetworkSpec spec_from(const json& j) {
  NetworkSpec spec;
  spec.input_shape = j.at("input_shape").get<Extents3>();
  spec.head = parse_head(j.at("head").get<std::string>());
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
  infer_shapes(spec);
  return spec;
}

template <class T>
void put(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw TruncatedFile("weights.bin: unexpected end of data");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + p.string());
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) { return spec_json(spec).dump(); }

NetworkSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("network spec: ") + e.what());
  }
}

std::string spec_hash(const NetworkSpec& spec) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : spec_to_json(spec)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string encode_arrays(const std::map<std::string, Tensor>& arrays) {
  std::string out;
  for (const auto& [name, t] : arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<double>(out, v);
  }
  return out;
}

std::map<std::string, Tensor> decode_arrays(const std::string& bytes) {
  std::map<std::string, Tensor> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto len = take<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw TruncatedFile("weights.bin: truncated array name");
    std::string name = bytes.substr(pos, len);
    pos += len;
    const auto rank = take<std::uint32_t>(bytes, pos);
    if (rank > kMaxRank) throw FormatError("weights.bin: array '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(take<std::uint64_t>(bytes, pos));
    const std::size_t n = numel(shape);
    if (pos + n * sizeof(double) > bytes.size()) {
      throw TruncatedFile("weights.bin: array '" + name + "' is truncated");
    }
    std::vector<double> data(n);
    std::memcpy(data.data(), bytes.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    if (!out.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw FormatError("weights.bin: duplicate array '" + name + "'");
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json manifest{{"format_version", kCheckpointFormatVersion},
                {"spec", spec_json(checkpoint.spec)},
                {"spec_hash", spec_hash(checkpoint.spec)},
                {"epoch", checkpoint.epoch},
                {"seed", checkpoint.seed},
                {"metrics", checkpoint.metrics},
                {"weights", "weights.bin"}};
  write_file(dir / "checkpoint.json", manifest.dump(2) + "\n");
  write_file(dir / "weights.bin", encode_arrays(checkpoint.arrays));
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / "checkpoint.json");
  Checkpoint c;
  try {
    const json j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("checkpoint format_version " + std::to_string(version) + " is not supported");
    }
    c.spec = spec_from(j.at("spec"));
    if (j.at("spec_hash").get<std::string>() != spec_hash(c.spec)) {
      throw FormatError("checkpoint spec_hash does not match its spec");
    }
    c.epoch = j.at("epoch").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.metrics = j.at("metrics").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint.json: ") + e.what());
  }
  c.arrays = decode_arrays(read_file(dir / "weights.bin"));
  return c;
}

}  // namespace voxbayes
