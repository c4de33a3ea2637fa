// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "nifti_fixture.hpp"
#include "support.hpp"
#include "voxbayes/dataset.hpp"
#include "voxbayes/errors.hpp"
#include "voxbayes/nifti.hpp"
#include "voxbayes/volume.hpp"

using namespace voxbayes;
using namespace voxbayes::testing;

TEST_CASE("int16 fixture decodes with the 90 degree rotation") {
  const auto data = iota(32);
  const auto f = make_fixture({4, 4, 2}, 4, data);
  const auto img = parse_nifti(f.bytes);
  REQUIRE(img.volume.shape() == Shape{4, 4, 2});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        CHECK(img.volume.voxels[(i * 4 + j) * 2 + k] == expected_rotated(data, 4, 4, i, j, k));
  std::multiset<double> values(img.volume.voxels.data().begin(), img.volume.voxels.data().end());
  CHECK(values == std::multiset<double>(data.begin(), data.end()));
}

TEST_CASE("non-square slices swap the in-plane axes") {
  const auto data = iota(5 * 3 * 2);
  const auto img = parse_nifti(make_fixture({5, 3, 2}, 4, data).bytes);
  REQUIRE(img.volume.shape() == Shape{3, 5, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(img.volume.voxels[(i * 5 + j) * 2 + 1] == expected_rotated(data, 5, 3, i, j, 1));
}

TEST_CASE("fixture round-trips byte-identically") {
  for (bool big : {false, true}) {
    for (std::int16_t dt : {std::int16_t{4}, std::int16_t{16}}) {
      auto data = iota(60);
      if (dt == 16) {
        for (auto& v : data) v = v * 0.25 - 3.0;
      }
      const auto f = make_fixture({5, 4, 3}, dt, data, big, 2.0f, -7.0f);
      const auto img = parse_nifti(f.bytes);
      CHECK(serialize_nifti(img.header, img.volume) == f.bytes);
    }
  }
}

TEST_CASE("big-endian files decode like little-endian ones") {
  const auto data = iota(24);
  const auto le = parse_nifti(make_fixture({2, 3, 4}, 4, data, false).bytes);
  const auto be = parse_nifti(make_fixture({2, 3, 4}, 4, data, true).bytes);
  CHECK(le.header.endianness == Endianness::little);
  CHECK(be.header.endianness == Endianness::big);
  CHECK(le.volume.voxels == be.volume.voxels);
}

TEST_CASE("scl_slope and scl_inter are applied") {
  const auto img = parse_nifti(make_fixture({1, 1, 1}, 4, {1024}, false, 1.0f, -1024.0f).bytes);
  CHECK(img.volume.voxels[0] == 0.0);

  const auto scaled = parse_nifti(make_fixture({1, 1, 1}, 4, {10}, false, 2.5f, 1.0f).bytes);
  CHECK(scaled.volume.voxels[0] == 26.0);

  const auto zero_slope = parse_nifti(make_fixture({1, 1, 1}, 4, {-300}, false, 0.0f, 0.0f).bytes);
  CHECK(zero_slope.volume.voxels[0] == -300.0);
}

TEST_CASE("float32 data decodes") {
  const auto img = parse_nifti(make_fixture({1, 1, 2}, 16, {-1000.5, 12.25}).bytes);
  CHECK(img.volume.voxels[0] == -1000.5);
  CHECK(img.volume.voxels[1] == 12.25);
}

TEST_CASE("error contracts") {
  const auto good = make_fixture({2, 2, 2}, 4, iota(8));

  auto rank4 = make_fixture({2, 2, 2}, 4, iota(8), false, 1.0f, 0.0f, 4);
  CHECK_THROWS_AS(parse_nifti(rank4.bytes), UnsupportedRank);

  auto magic = good;
  std::memcpy(magic.bytes.data() + 344, "abc\0", 4);
  CHECK_THROWS_AS(parse_nifti(magic.bytes), FormatError);

  auto pair = good;
  std::memcpy(pair.bytes.data() + 344, "ni1\0", 4);
  CHECK_THROWS_AS(parse_nifti(pair.bytes), FormatError);

  auto dtype = good;
  dtype.put<std::int16_t>(70, 64);
  CHECK_THROWS_AS(parse_nifti(dtype.bytes), UnsupportedDatatype);

  auto cut = good.bytes;
  cut.resize(cut.size() - 1);
  CHECK_THROWS_AS(parse_nifti(cut), TruncatedFile);

  std::vector<std::uint8_t> tiny(100, 0);
  CHECK_THROWS_AS(parse_nifti(tiny), TruncatedFile);

  auto badsize = good;
  badsize.put<std::int32_t>(0, 540);
  CHECK_THROWS_AS(parse_nifti(badsize.bytes), FormatError);
}

TEST_CASE("file round trip through write_nifti and read_nifti") {
  voxbayes::testing::TempDir dir("nifti_io");
  Rng rng(3);
  Volume v{voxbayes::testing::uniform_tensor(rng, {6, 4, 3}, -1000, 400)};
  for (auto& x : v.voxels.data()) x = std::round(x);
  const auto path = dir.path() / "v.nii";
  write_nifti(path, make_nifti_header(v, nifti_datatype::int16), v);
  const auto back = read_nifti(path);
  CHECK(back.volume.voxels == v.voxels);
  CHECK(back.header.dim[1] == 4);
  CHECK(back.header.dim[2] == 6);
  CHECK_THROWS_AS(read_nifti(dir.path() / "missing.nii"), IoError);
}

TEST_CASE("HU windowing") {
  const HuWindow w4 = hu_window("W4");
  CHECK(w4.lower == -1000.0);
  CHECK(w4.upper == 0.0);
  Volume v{Tensor({3}, std::vector<double>{400, -1000, -500})};
  const Volume out = apply_hu_window(v, w4);
  CHECK(out.voxels[0] == 1.0);
  CHECK(out.voxels[1] == 0.0);
  CHECK(out.voxels[2] == 0.5);
  CHECK(hu_window("W1").upper == 400.0);
  CHECK_THROWS_AS(hu_window("W9"), ConfigError);
  CHECK_THROWS_AS(apply_hu_window(v, HuWindow{"bad", 5, 5}), ConfigError);
}

TEST_CASE("HU windowing is monotone and lands in [0, 1]") {
  Rng rng(8);
  for (const auto& w : standard_hu_windows()) {
    Tensor t = voxbayes::testing::uniform_tensor(rng, {200}, -2000, 2000);
    std::sort(t.data().begin(), t.data().end());
    const Volume out = apply_hu_window(volume_of(t), w);
    for (std::size_t i = 0; i < out.voxels.size(); ++i) {
      CHECK(out.voxels[i] >= 0.0);
      CHECK(out.voxels[i] <= 1.0);
      if (i) CHECK(out.voxels[i] >= out.voxels[i - 1]);
    }
  }
}

TEST_CASE("augmentation examples") {
  Rng data_rng(4);
  const Volume v{voxbayes::testing::uniform_tensor(data_rng, {8, 8, 4}, 0, 1)};

  Rng rng(1);
  AugmentPolicy identity{.rotate = false, .max_angle_deg = 0.0, .flip = false, .noise_sigma = 0.0};
  CHECK(augment(v, rng, identity).voxels == v.voxels);

  CHECK(flip_axis(flip_axis(v, 0), 0).voxels == v.voxels);
  CHECK_FALSE(flip_axis(v, 0).voxels == v.voxels);
  CHECK_THROWS_AS(flip_axis(v, 3), ConfigError);

  AugmentPolicy bad;
  bad.noise_sigma = -0.1;
  CHECK_THROWS_AS(augment(v, rng, bad), ConfigError);
}

TEST_CASE("rotation by +20 then -20 degrees nearly restores a smooth blob") {
  const std::size_t n = 32, nz = 4;
  Tensor t({n, n, nz});
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t z = 0; z < nz; ++z) {
        const double dx = x - 15.5, dy = y - 15.5;
        t[(x * n + y) * nz + z] = std::exp(-(dx * dx + dy * dy) / (2 * 16.0));
      }
  const Volume v{t};
  const Volume back = rotate_z(rotate_z(v, 20.0), -20.0);
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      const double dx = x - 15.5, dy = y - 15.5;
      if (std::sqrt(dx * dx + dy * dy) > 12.0) continue;  // zero-fill border
      for (std::size_t z = 0; z < nz; ++z) {
        const std::size_t i = (x * n + y) * nz + z;
        worst = std::max(worst, std::abs(back.voxels[i] - v.voxels[i]));
      }
    }
  CHECK(worst < 0.05);
}

TEST_CASE("augment preserves shape and range") {
  Rng data_rng(9);
  const Volume v{voxbayes::testing::uniform_tensor(data_rng, {10, 7, 5}, 0, 1)};
  for (std::uint64_t s = 0; s < 30; ++s) {
    Rng rng(s);
    AugmentPolicy p;
    p.noise_sigma = 0.2;
    const Volume out = augment(v, rng, p);
    CHECK(out.shape() == v.shape());
    for (double x : out.voxels.data()) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
  }
}

TEST_CASE("split sizes") {
  CHECK(split_sizes(10, kDefaultSplit) == std::array<std::size_t, 3>{7, 2, 1});
  CHECK(split_sizes(3, kDefaultSplit) == std::array<std::size_t, 3>{1, 1, 1});
  CHECK(split_sizes(200, kDefaultSplit) == std::array<std::size_t, 3>{140, 40, 20});
  CHECK_THROWS_AS(split_sizes(0, kDefaultSplit), ConfigError);
  CHECK_THROWS_AS(split_sizes(10, SplitRatios{0.5, 0.2, 0.2}), ConfigError);
}

TEST_CASE("split_dataset partitions and is deterministic") {
  for (std::size_t n : {3u, 4u, 10u, 37u, 200u}) {
    Rng a(21), b(21);
    const auto ia = split_indices(n, kDefaultSplit, a);
    const auto ib = split_indices(n, kDefaultSplit, b);
    CHECK(ia.train == ib.train);
    CHECK(ia.test == ib.test);
    CHECK(ia.validation == ib.validation);
    std::set<std::size_t> all;
    for (const auto* part : {&ia.train, &ia.test, &ia.validation}) {
      CHECK_FALSE(part->empty());
      all.insert(part->begin(), part->end());
    }
    CHECK(ia.train.size() + ia.test.size() + ia.validation.size() == n);
    CHECK(all.size() == n);
  }
  std::vector<int> items(10);
  Rng rng(1);
  const auto split = split_dataset(items, kDefaultSplit, rng);
  CHECK(split.train.size() == 7);
  CHECK(split.test.size() == 2);
  CHECK(split.validation.size() == 1);
}

TEST_CASE("label mapping and held-out groups") {
  CHECK(label_for(SourceClass::ct0) == 0);
  for (auto c : {SourceClass::ct1, SourceClass::ct2, SourceClass::ct3, SourceClass::ct4}) CHECK(label_for(c) == 1);
  CHECK(is_held_out(SourceClass::ct1));
  CHECK(is_held_out(SourceClass::ct4));
  CHECK_FALSE(is_held_out(SourceClass::ct2));
  CHECK(parse_source_class("CT-3") == SourceClass::ct3);
  CHECK(to_string(SourceClass::ct4) == "CT-4");
  CHECK_THROWS_AS(parse_source_class("CT-9"), FormatError);
}

TEST_CASE("manifest CSV round trip resolves relative paths") {
  voxbayes::testing::TempDir dir("manifest");
  const auto csv = dir.path() / "manifest.csv";
  write_manifest(csv, {{"a.nii", SourceClass::ct0}, {"sub/b.nii", SourceClass::ct3}});
  const auto back = read_manifest(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].path == (dir.path() / "a.nii").string());
  CHECK(back[1].source_class == SourceClass::ct3);

  std::ofstream(dir.path() / "bad.csv") << "file,group\na.nii,CT-0\n";
  CHECK_THROWS_AS(read_manifest(dir.path() / "bad.csv"), FormatError);
}
