// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace voxbayes::svg {

/// Fixed two-decimal formatting so output is byte-stable.
std::string num(double v);
std::string escape(const std::string& text);
/// "#rrggbb" from components in [0, 1].
std::string rgb(double r, double g, double b);
/// Diverging map on [-1, 1]: blue, white at 0, red.
std::string diverging(double t);
std::string gray(double v);

class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill, double opacity = 1.0,
            const std::string& stroke = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& dash = "");
  void text(double x, double y, const std::string& content, double size = 12.0,
            const std::string& anchor = "start");
  std::string str() const;

 private:
  double width_, height_;
  std::string body_;
};

}  // namespace voxbayes::svg
