// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxbayes/volume.hpp"

namespace voxbayes {

enum class Endianness { little, big };

namespace nifti_datatype {
inline constexpr std::int16_t int16 = 4;
inline constexpr std::int16_t float32 = 16;
}  // namespace nifti_datatype

/// The subset of the 348-byte NIfTI-1 header this library reads and writes.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = nifti_datatype::int16;
  std::int16_t bitpix = 16;
  std::array<float, 8> pixdim{1.0f, 1.0f, 1.0f, 1.0f, 0.0f, 0.0f, 0.0f, 0.0f};
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::array<char, 4> magic{'n', '+', '1', '\0'};
  Endianness endianness = Endianness::little;
};

struct NiftiImage {
  NiftiHeader header;
  Volume volume;  // raw HU after scaling and the 90-degree in-plane rotation
};

/// Decodes a single-file .nii image. Byte order is detected from dim[0];
/// int16 and float32 data are supported. scl_slope 0 is treated as 1.
/// Slices are rotated 90 degrees counter-clockwise in the (X,Y) plane, so an
/// (X,Y,Z) file yields a (Y,X,Z) volume.
NiftiImage parse_nifti(std::span<const std::uint8_t> bytes, const std::string& source = "");
NiftiImage read_nifti(const std::filesystem::path& path);

/// Inverse of parse_nifti: undoes the rotation and the scaling, then encodes
/// with the header's datatype and byte order. Header fields outside
/// NiftiHeader are written as zero.
std::vector<std::uint8_t> serialize_nifti(const NiftiHeader& header, const Volume& volume);
void write_nifti(const std::filesystem::path& path, const NiftiHeader& header,
                 const Volume& volume);

/// Header for an (X,Y,Z) file holding `volume` after its parse-time rotation,
/// i.e. a volume of shape (Y,X,Z) produces dim = (3, X, Y, Z).
NiftiHeader make_nifti_header(const Volume& volume, std::int16_t datatype,
                              Endianness endianness = Endianness::little);

}  // namespace voxbayes
