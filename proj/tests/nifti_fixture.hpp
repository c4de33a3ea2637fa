// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <vector>

namespace voxbayes::testing {

// Independent byte-level fixture writer: offsets straight from the NIfTI-1 layout.
struct Fixture {
  std::vector<std::uint8_t> bytes;
  bool big = false;

  template <class T>
  void put(std::size_t at, T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if (big) std::reverse(raw, raw + sizeof(T));
    std::memcpy(bytes.data() + at, raw, sizeof(T));
  }
};

inline Fixture make_fixture(std::array<std::int16_t, 3> dims, std::int16_t datatype, const std::vector<double>& data,
                     bool big = false, float slope = 1.0f, float inter = 0.0f, std::int16_t rank = 3) {
  const std::size_t bpv = datatype == 16 ? 4 : 2;
  Fixture f;
  f.big = big;
  f.bytes.assign(352 + data.size() * bpv, 0);
  f.put<std::int32_t>(0, 348);
  f.put<std::int16_t>(40, rank);
  for (int i = 0; i < 3; ++i) f.put<std::int16_t>(42 + 2 * i, dims[i]);
  for (int i = 3; i < 7; ++i) f.put<std::int16_t>(42 + 2 * i, 1);
  f.put<std::int16_t>(70, datatype);
  f.put<std::int16_t>(72, static_cast<std::int16_t>(bpv * 8));
  for (int i = 0; i < 4; ++i) f.put<float>(76 + 4 * i, 1.0f);
  f.put<float>(108, 352.0f);
  f.put<float>(112, slope);
  f.put<float>(116, inter);
  std::memcpy(f.bytes.data() + 344, "n+1\0", 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (datatype == 16) {
      f.put<float>(352 + 4 * i, static_cast<float>(data[i]));
    } else {
      f.put<std::int16_t>(352 + 2 * i, static_cast<std::int16_t>(data[i]));
    }
  }
  return f;
}

inline std::vector<double> iota(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
  return v;
}

// Value at rotated (i,j,k) for a file (X,Y,Z) written x-fastest: out[i,j] = in[j, Y-1-i].
inline double expected_rotated(const std::vector<double>& file, std::size_t X, std::size_t Y, std::size_t i,
                        std::size_t j, std::size_t k) {
  const std::size_t x = j, y = Y - 1 - i;
  return file[x + X * (y + Y * k)];
}

}  // namespace voxbayes::testing
