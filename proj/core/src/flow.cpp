// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/flow.hpp"

#include <cmath>
#include <numbers>

#include "voxbayes/errors.hpp"

namespace voxbayes {

std::vector<Var> CouplingStep::parameters() const {
  return {scale_w1, scale_b1, scale_w2, scale_b2, shift_w1, shift_b1, shift_w2, shift_b2};
}

std::vector<Var> FlowStack::parameters() const {
  std::vector<Var> out;
  for (const auto& s : steps) {
    auto p = s.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<std::pair<std::string, Var>> FlowStack::named_parameters(const std::string& prefix) const {
  static const char* names[] = {"scale_w1", "scale_b1", "scale_w2", "scale_b2",
                                "shift_w1", "shift_b1", "shift_w2", "shift_b2"};
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    auto params = steps[k].parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.emplace_back(prefix + ".step" + std::to_string(k) + "." + names[i], params[i]);
    }
  }
  return out;
}

FlowStack make_flow(std::size_t dim, Rng& rng, const FlowOptions& options) {
  if (dim == 0) throw ConfigError("make_flow: dimension must be >= 1");
  if (options.hidden == 0) throw ConfigError("make_flow: hidden width must be >= 1");
  auto randn = [&rng](Shape shape, double scale) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = scale == 0.0 ? 0.0 : scale * rng.normal();
    return parameter(std::move(t));
  };
  const std::size_t h = options.hidden;
  FlowStack flow;
  flow.dim = dim;
  for (std::size_t k = 0; k < options.steps; ++k) {
    CouplingStep step;
    step.mask = Tensor(Shape{1, dim});
    if (dim > 1) {
      for (std::size_t i = 0; i < dim; ++i) step.mask[i] = ((i + k) % 2 == 0) ? 1.0 : 0.0;
    }
    step.scale_w1 = randn({dim, h}, options.input_scale);
    step.scale_b1 = randn({h}, options.input_scale);
    step.scale_w2 = randn({h, dim}, options.output_scale);
    step.scale_b2 = randn({dim}, options.output_scale);
    step.shift_w1 = randn({dim, h}, options.input_scale);
    step.shift_b1 = randn({h}, options.input_scale);
    step.shift_w2 = randn({h, dim}, options.output_scale);
    step.shift_b2 = randn({dim}, options.output_scale);
    flow.steps.push_back(std::move(step));
  }
  return flow;
}

namespace {

Var as_rows(const Var& z, std::size_t dim) {
  const auto& s = z->shape();
  if (s.size() == 1 && s[0] == dim) return ad::reshape(z, {1, dim});
  if (s.size() == 2 && s[1] == dim) return z;
  throw ShapeError("flow: input shape " + shape_str(s) + " does not match flow dimension " +
                   std::to_string(dim));
}

Var dense(const Var& x, const Var& w, const Var& b) {
  const std::size_t rows = x->shape()[0];
  const std::size_t cols = w->shape()[1];
  return ad::add(ad::matmul(x, w), ad::broadcast_to(b, {rows, cols}));
}

struct StepOutputs {
  Var log_scale;  // zero on masked coordinates
  Var shift;      // zero on masked coordinates
};

StepOutputs conditioner(const CouplingStep& step, const Var& rows) {
  const Shape shape = rows->shape();
  const Var mask = ad::broadcast_to(constant(step.mask), shape);
  Tensor inv_mask_t = step.mask;
  for (auto& v : inv_mask_t.data()) v = 1.0 - v;
  const Var inv_mask = ad::broadcast_to(constant(inv_mask_t), shape);

  const Var masked = ad::mul(rows, mask);
  const Var hs = ad::tanh(dense(masked, step.scale_w1, step.scale_b1));
  const Var s = ad::mul(ad::tanh(dense(hs, step.scale_w2, step.scale_b2)), inv_mask);
  const Var ht = ad::tanh(dense(masked, step.shift_w1, step.shift_b1));
  const Var t = ad::mul(dense(ht, step.shift_w2, step.shift_b2), inv_mask);
  return {s, t};
}

}  // namespace

Var row_sum(const Var& m) {
  const auto& s = m->shape();
  if (s.size() != 2) throw ShapeError("row_sum: expects a matrix, got " + shape_str(s));
  const Var ones = constant(Tensor(Shape{s[1], 1}, 1.0));
  return ad::reshape(ad::matmul(m, ones), {s[0]});
}

Var gaussian_log_density_rows(const Var& x, const Var& mean, const Var& var) {
  // -0.5 * log(2 pi var) - (x - mean)^2 / (2 var)
  const Var diff = ad::sub(x, mean);
  const Var quad = ad::div(ad::square(diff), ad::scale(var, 2.0));
  const Var logn = ad::scale(ad::log(ad::scale(var, 2.0 * std::numbers::pi)), -0.5);
  return row_sum(ad::sub(logn, quad));
}

FlowResult flow_forward(const Var& z, const FlowStack& flow) {
  Var rows = as_rows(z, flow.dim);
  const std::size_t batch = rows->shape()[0];
  Var log_det = constant(Tensor(Shape{batch}, 0.0));
  for (const auto& step : flow.steps) {
    auto [s, t] = conditioner(step, rows);
    rows = ad::add(ad::mul(rows, ad::exp(s)), t);
    log_det = ad::add(log_det, row_sum(s));
  }
  return {rows, log_det};
}

FlowResult flow_inverse(const Var& z, const FlowStack& flow) {
  Var rows = as_rows(z, flow.dim);
  const std::size_t batch = rows->shape()[0];
  Var log_det = constant(Tensor(Shape{batch}, 0.0));
  for (auto it = flow.steps.rbegin(); it != flow.steps.rend(); ++it) {
    auto [s, t] = conditioner(*it, rows);
    rows = ad::mul(ad::sub(rows, t), ad::exp(ad::neg(s)));
    log_det = ad::sub(log_det, row_sum(s));
  }
  return {rows, log_det};
}

Var flow_log_density(const Var& zK, const FlowStack& flow) {
  auto [z0, log_det_inv] = flow_inverse(zK, flow);
  const Shape shape = z0->shape();
  const Var zeros = constant(Tensor(shape, 0.0));
  const Var ones = constant(Tensor(shape, 1.0));
  return ad::add(gaussian_log_density_rows(z0, zeros, ones), log_det_inv);
}

}  // namespace voxbayes
