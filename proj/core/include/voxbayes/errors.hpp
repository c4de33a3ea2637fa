// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace voxbayes {

/// Base class of every error raised by the library. `kind()` is a stable
/// short name that the CLI prints in its structured error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define VOXBAYES_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  }

VOXBAYES_DEFINE_ERROR(ShapeError);
VOXBAYES_DEFINE_ERROR(ConfigError);
VOXBAYES_DEFINE_ERROR(NumericalError);
VOXBAYES_DEFINE_ERROR(GraphError);
VOXBAYES_DEFINE_ERROR(FormatError);
VOXBAYES_DEFINE_ERROR(UnsupportedRank);
VOXBAYES_DEFINE_ERROR(UnsupportedDatatype);
VOXBAYES_DEFINE_ERROR(TruncatedFile);
VOXBAYES_DEFINE_ERROR(UndefinedMetric);
VOXBAYES_DEFINE_ERROR(TooManyPatches);
VOXBAYES_DEFINE_ERROR(IoError);

#undef VOXBAYES_DEFINE_ERROR

}  // namespace voxbayes
