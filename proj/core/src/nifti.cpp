// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "voxbayes/errors.hpp"

namespace voxbayes {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMinFileSize = 352;

// Field offsets within the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffMagic = 344;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <class T>
  T get(std::size_t offset) const {
    std::array<std::uint8_t, sizeof(T)> raw;
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class Writer {
 public:
  Writer(std::vector<std::uint8_t>& out, bool swap) : out_(out), swap_(swap) {}

  template <class T>
  void put(std::size_t offset, T value) {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    if (swap_) std::reverse(raw.begin(), raw.end());
    std::memcpy(out_.data() + offset, raw.data(), sizeof(T));
  }

 private:
  std::vector<std::uint8_t>& out_;
  bool swap_;
};

bool host_is_little() { return std::endian::native == std::endian::little; }

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case nifti_datatype::int16:
      return 2;
    case nifti_datatype::float32:
      return 4;
    default:
      throw UnsupportedDatatype("NIfTI datatype code " + std::to_string(datatype) +
                                " is not supported (int16=4, float32=16)");
  }
}

}  // namespace

NiftiImage parse_nifti(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < kMinFileSize) {
    throw TruncatedFile("NIfTI file is " + std::to_string(bytes.size()) +
                        " bytes, shorter than the 352-byte minimum");
  }

  const bool little_host = host_is_little();
  bool swap = false;
  {
    Reader probe(bytes, !little_host);  // read as little-endian
    const auto d0 = probe.get<std::int16_t>(kOffDim);
    if (d0 < 1 || d0 > 7) {
      Reader be(bytes, little_host);
      const auto d0b = be.get<std::int16_t>(kOffDim);
      if (d0b < 1 || d0b > 7) throw FormatError("NIfTI dim[0] is out of range in both byte orders");
      swap = little_host;
    } else {
      swap = !little_host;
    }
  }
  Reader rd(bytes, swap);

  NiftiHeader h;
  h.endianness = (swap == little_host) ? Endianness::big : Endianness::little;
  h.sizeof_hdr = rd.get<std::int32_t>(0);
  if (h.sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    throw FormatError("NIfTI sizeof_hdr is " + std::to_string(h.sizeof_hdr) + ", expected 348");
  }
  std::memcpy(h.magic.data(), bytes.data() + kOffMagic, 4);
  if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0) {
    throw FormatError("NIfTI header-only pair (.hdr/.img) is not supported; magic 'ni1'");
  }
  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) {
    throw FormatError("bad NIfTI magic; expected 'n+1'");
  }
  for (std::size_t i = 0; i < 8; ++i) h.dim[i] = rd.get<std::int16_t>(kOffDim + 2 * i);
  if (h.dim[0] != 3) {
    throw UnsupportedRank("NIfTI dim[0] is " + std::to_string(h.dim[0]) +
                          "; only 3-D volumes are supported");
  }
  h.datatype = rd.get<std::int16_t>(kOffDatatype);
  h.bitpix = rd.get<std::int16_t>(kOffBitpix);
  for (std::size_t i = 0; i < 8; ++i) h.pixdim[i] = rd.get<float>(kOffPixdim + 4 * i);
  h.vox_offset = rd.get<float>(kOffVoxOffset);
  h.scl_slope = rd.get<float>(kOffSclSlope);
  h.scl_inter = rd.get<float>(kOffSclInter);

  const std::size_t bpv = bytes_per_voxel(h.datatype);
  for (int a = 1; a <= 3; ++a) {
    if (h.dim[a] < 1) throw FormatError("NIfTI dim[" + std::to_string(a) + "] must be positive");
  }
  const std::size_t nx = static_cast<std::size_t>(h.dim[1]);
  const std::size_t ny = static_cast<std::size_t>(h.dim[2]);
  const std::size_t nz = static_cast<std::size_t>(h.dim[3]);
  const std::size_t count = nx * ny * nz;
  if (!(h.vox_offset >= static_cast<float>(kMinFileSize)) || !std::isfinite(h.vox_offset)) {
    throw FormatError("NIfTI vox_offset must be >= 352 for single-file images");
  }
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  if (offset + count * bpv > bytes.size()) {
    throw TruncatedFile("NIfTI data section needs " + std::to_string(count * bpv) + " bytes at " +
                        std::to_string(offset) + " but the file has " +
                        std::to_string(bytes.size()));
  }

  const double slope = h.scl_slope == 0.0f ? 1.0 : static_cast<double>(h.scl_slope);
  const double inter = static_cast<double>(h.scl_inter);

  // File order is x fastest. Rotate 90 degrees CCW: out[i][j][k] = in[j][ny-1-i][k].
  Tensor voxels(Shape{ny, nx, nz});
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t file_idx = x + nx * (y + ny * k);
        const std::size_t at = offset + file_idx * bpv;
        const double raw = h.datatype == nifti_datatype::int16
                               ? static_cast<double>(rd.get<std::int16_t>(at))
                               : static_cast<double>(rd.get<float>(at));
        const std::size_t i = ny - 1 - y, j = x;
        voxels[(i * nx + j) * nz + k] = raw * slope + inter;
      }
    }
  }

  NiftiImage img;
  img.header = h;
  img.volume.voxels = std::move(voxels);
  img.volume.spacing = {h.pixdim[2], h.pixdim[1], h.pixdim[3]};
  img.volume.source = source;
  img.volume.transforms.push_back("rot90_xy");
  return img;
}

NiftiImage read_nifti(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open NIfTI file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_nifti(bytes, path.string());
}

NiftiHeader make_nifti_header(const Volume& volume, std::int16_t datatype, Endianness endianness) {
  const auto& s = volume.voxels.shape();
  if (s.size() != 3) throw ShapeError("make_nifti_header: volume must be (X,Y,Z)");
  NiftiHeader h;
  h.dim = {3, static_cast<std::int16_t>(s[1]), static_cast<std::int16_t>(s[0]),
           static_cast<std::int16_t>(s[2]), 1, 1, 1, 1};
  h.datatype = datatype;
  h.bitpix = static_cast<std::int16_t>(8 * bytes_per_voxel(datatype));
  h.pixdim = {1.0f, static_cast<float>(volume.spacing[1]), static_cast<float>(volume.spacing[0]),
              static_cast<float>(volume.spacing[2]), 0.0f, 0.0f, 0.0f, 0.0f};
  h.endianness = endianness;
  return h;
}

std::vector<std::uint8_t> serialize_nifti(const NiftiHeader& h, const Volume& volume) {
  const std::size_t bpv = bytes_per_voxel(h.datatype);
  const std::size_t nx = static_cast<std::size_t>(h.dim[1]);
  const std::size_t ny = static_cast<std::size_t>(h.dim[2]);
  const std::size_t nz = static_cast<std::size_t>(h.dim[3]);
  if (volume.voxels.shape() != Shape{ny, nx, nz}) {
    throw ShapeError("serialize_nifti: volume shape " + shape_str(volume.voxels.shape()) +
                     " does not match header dims (rotated) " + shape_str(Shape{ny, nx, nz}));
  }
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  std::vector<std::uint8_t> out(offset + nx * ny * nz * bpv, 0);
  const bool swap = (h.endianness == Endianness::little) != host_is_little();
  Writer w(out, swap);
  w.put<std::int32_t>(0, h.sizeof_hdr);
  for (std::size_t i = 0; i < 8; ++i) w.put<std::int16_t>(kOffDim + 2 * i, h.dim[i]);
  w.put<std::int16_t>(kOffDatatype, h.datatype);
  w.put<std::int16_t>(kOffBitpix, h.bitpix);
  for (std::size_t i = 0; i < 8; ++i) w.put<float>(kOffPixdim + 4 * i, h.pixdim[i]);
  w.put<float>(kOffVoxOffset, h.vox_offset);
  w.put<float>(kOffSclSlope, h.scl_slope);
  w.put<float>(kOffSclInter, h.scl_inter);
  std::memcpy(out.data() + kOffMagic, h.magic.data(), 4);

  const double slope = h.scl_slope == 0.0f ? 1.0 : static_cast<double>(h.scl_slope);
  const double inter = static_cast<double>(h.scl_inter);
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t i = ny - 1 - y, j = x;
        const double raw = (volume.voxels[(i * nx + j) * nz + k] - inter) / slope;
        const std::size_t at = offset + (x + nx * (y + ny * k)) * bpv;
        if (h.datatype == nifti_datatype::int16) {
          w.put<std::int16_t>(at, static_cast<std::int16_t>(std::lround(raw)));
        } else {
          w.put<float>(at, static_cast<float>(raw));
        }
      }
    }
  }
  return out;
}

void write_nifti(const std::filesystem::path& path, const NiftiHeader& header,
                 const Volume& volume) {
  const auto bytes = serialize_nifti(header, volume);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write NIfTI file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing NIfTI file " + path.string());
}

}  // namespace voxbayes
