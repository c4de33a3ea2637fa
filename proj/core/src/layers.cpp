// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/layers.hpp"

#include <cmath>

#include "voxbayes/errors.hpp"

namespace voxbayes {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::maxpool3d: return "maxpool3d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::global_maxpool: return "global_maxpool";
    case LayerKind::sigmoid_head: return "sigmoid_head";
  }
  return "unknown";
}

std::string to_string(BayesVariant v) {
  switch (v) {
    case BayesVariant::none: return "none";
    case BayesVariant::reparam: return "reparam";
    case BayesVariant::local_reparam: return "local_reparam";
    case BayesVariant::flipout: return "flipout";
    case BayesVariant::mnf: return "mnf";
  }
  return "unknown";
}

std::string to_string(Head h) { return h == Head::sigmoid ? "sigmoid" : "bernoulli_mean"; }

BayesVariant parse_bayes_variant(const std::string& s) {
  for (auto v : {BayesVariant::none, BayesVariant::reparam, BayesVariant::local_reparam,
                 BayesVariant::flipout, BayesVariant::mnf}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown bayes variant '" + s +
                    "' (expected none|reparam|local_reparam|flipout|mnf)");
}

Head parse_head(const std::string& s) {
  if (s == "sigmoid") return Head::sigmoid;
  if (s == "bernoulli_mean") return Head::bernoulli_mean;
  throw ConfigError("unknown head '" + s + "' (expected sigmoid|bernoulli_mean)");
}

LayerKind parse_layer_kind(const std::string& s) {
  for (auto k : {LayerKind::conv3d, LayerKind::maxpool3d, LayerKind::batchnorm, LayerKind::relu,
                 LayerKind::dense, LayerKind::dropout, LayerKind::global_maxpool,
                 LayerKind::sigmoid_head}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown layer kind '" + s + "'");
}

std::string LayerSpec::kind_name() const {
  auto name = to_string(kind);
  if (variant != BayesVariant::none) name += "_" + to_string(variant);
  return name;
}

NetworkSpec build_reference_model(const Extents3& input_shape, BayesVariant variant, Head head,
                                  const ReferenceOptions& options) {
  for (auto e : input_shape) {
    if (e < 8) {
      throw ShapeError("reference model needs input extents >= 8 for three pooling stages, got " +
                       shape_str(Shape(input_shape.begin(), input_shape.end())));
    }
  }
  if (options.dropout < 0.0 || options.dropout >= 1.0) {
    throw ConfigError("dropout rate must be in [0, 1)");
  }
  NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.head = head;
  for (int block = 0; block < 3; ++block) {
    LayerSpec conv;
    conv.kind = LayerKind::conv3d;
    conv.variant = variant;
    conv.activation = Activation::relu;
    conv.filters = options.filters;
    conv.kernel = options.kernel;
    conv.padding = ad::Padding::same;
    spec.layers.push_back(conv);

    LayerSpec pool;
    pool.kind = LayerKind::maxpool3d;
    pool.pool = 2;
    spec.layers.push_back(pool);

    LayerSpec bn;
    bn.kind = LayerKind::batchnorm;
    spec.layers.push_back(bn);
  }
  spec.layers.push_back(LayerSpec{.kind = LayerKind::global_maxpool});
  spec.layers.push_back(LayerSpec{.kind = LayerKind::dense,
                                  .variant = variant,
                                  .activation = Activation::relu,
                                  .filters = options.dense_units});
  spec.layers.push_back(LayerSpec{.kind = LayerKind::dropout, .rate = options.dropout});
  spec.layers.push_back(
      LayerSpec{.kind = LayerKind::dense, .variant = variant, .filters = 1});
  spec.layers.push_back(LayerSpec{.kind = LayerKind::sigmoid_head});
  infer_shapes(spec);
  return spec;
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  Shape cur{1, spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + l.kind_name() + ")";
    switch (l.kind) {
      case LayerKind::conv3d: {
        if (cur.size() != 4) throw ShapeError(where + ": expects (C,X,Y,Z) input, got " + shape_str(cur));
        if (l.filters == 0 || l.kernel == 0) throw ShapeError(where + ": filters and kernel must be >= 1");
        Shape next{l.filters, 0, 0, 0};
        for (int a = 0; a < 3; ++a) {
          next[a + 1] = kernels::conv_axis(cur[a + 1], l.kernel, l.stride, l.padding).out;
        }
        cur = next;
        break;
      }
      case LayerKind::maxpool3d:
        if (cur.size() != 4) throw ShapeError(where + ": expects (C,X,Y,Z) input, got " + shape_str(cur));
        for (int a = 1; a < 4; ++a) {
          if (l.pool == 0 || l.pool > cur[a]) {
            throw ShapeError(where + ": pool window " + std::to_string(l.pool) +
                             " exceeds extent of " + shape_str(cur));
          }
          cur[a] /= l.pool;
        }
        break;
      case LayerKind::batchnorm:
      case LayerKind::relu:
        break;
      case LayerKind::dropout:
        if (l.rate < 0.0 || l.rate >= 1.0) throw ConfigError(where + ": dropout rate must be in [0, 1)");
        break;
      case LayerKind::global_maxpool:
        if (cur.size() != 4) throw ShapeError(where + ": expects (C,X,Y,Z) input, got " + shape_str(cur));
        cur = Shape{cur[0]};
        break;
      case LayerKind::dense:
        if (cur.size() != 1) throw ShapeError(where + ": expects a flat input, got " + shape_str(cur));
        if (l.filters == 0) throw ShapeError(where + ": units must be >= 1");
        cur = Shape{l.filters};
        break;
      case LayerKind::sigmoid_head:
        if (cur != Shape{1}) throw ShapeError(where + ": expects a single logit, got " + shape_str(cur));
        break;
    }
    shapes.push_back(cur);
  }
  if (cur != Shape{1}) throw ShapeError("network output must have shape [1], got " + shape_str(cur));
  return shapes;
}

Tensor conv3d(const Tensor& input, const Tensor& kernels, std::size_t stride, ad::Padding padding) {
  return ad::conv3d(constant(input), constant(kernels), {stride, padding})->value();
}

Tensor maxpool3d(const Tensor& input, std::size_t window) {
  return ad::maxpool3d(constant(input), {window, window, window})->value();
}

BatchNormState::BatchNormState(std::size_t channels)
    : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}

namespace {

struct ChannelLayout {
  std::size_t batch = 0, channels = 0, spatial = 0;
};

ChannelLayout channel_layout(const Shape& s) {
  if (s.size() < 2) throw ShapeError("batchnorm: expects (B,C,...) input, got " + shape_str(s));
  ChannelLayout l{s[0], s[1], 1};
  for (std::size_t i = 2; i < s.size(); ++i) l.spatial *= s[i];
  return l;
}

}  // namespace

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state,
              BatchNormMode mode) {
  const auto layout = channel_layout(x->shape());
  const Shape cshape{layout.channels};
  if (gamma->shape() != cshape || beta->shape() != cshape) {
    throw ShapeError("batchnorm: gamma/beta must be " + shape_str(cshape) + ", got " +
                     shape_str(gamma->shape()) + " and " + shape_str(beta->shape()));
  }
  if (state.running_mean.shape() != cshape) {
    throw ShapeError("batchnorm: running statistics have shape " +
                     shape_str(state.running_mean.shape()) + ", expected " + shape_str(cshape));
  }
  const double eps = state.epsilon;
  const std::size_t per_channel = layout.batch * layout.spatial;

  if (mode == BatchNormMode::infer) {
    const Tensor rm = state.running_mean, rv = state.running_var;
    return make_op(
        "batchnorm", {x, gamma, beta},
        [=](const std::vector<Var>& p) {
          Tensor out(p[0]->shape());
          auto xv = p[0]->value().data();
          auto y = out.data();
          for (std::size_t b = 0; b < layout.batch; ++b)
            for (std::size_t c = 0; c < layout.channels; ++c) {
              const double inv = 1.0 / std::sqrt(rv[c] + eps);
              const double g = p[1]->value()[c], be = p[2]->value()[c];
              const std::size_t base = (b * layout.channels + c) * layout.spatial;
              for (std::size_t s = 0; s < layout.spatial; ++s) {
                y[base + s] = g * (xv[base + s] - rm[c]) * inv + be;
              }
            }
          return out;
        },
        [=](const DiffNode& self, const std::vector<Var>& p) {
          auto g = self.grad().data();
          auto xv = p[0]->value().data();
          for (std::size_t b = 0; b < layout.batch; ++b)
            for (std::size_t c = 0; c < layout.channels; ++c) {
              const double inv = 1.0 / std::sqrt(rv[c] + eps);
              const double gam = p[1]->value()[c];
              const std::size_t base = (b * layout.channels + c) * layout.spatial;
              for (std::size_t s = 0; s < layout.spatial; ++s) {
                const double gi = g[base + s];
                if (p[0]->requires_grad()) p[0]->grad_buffer()[base + s] += gi * gam * inv;
                if (p[1]->requires_grad()) p[1]->grad_buffer()[c] += gi * (xv[base + s] - rm[c]) * inv;
                if (p[2]->requires_grad()) p[2]->grad_buffer()[c] += gi;
              }
            }
        });
  }

  if (layout.batch < 2) throw ConfigError("batchnorm: train mode requires a batch of at least 2");

  // Batch moments are shared between the value and the gradient rule.
  auto moments = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>();
  auto compute_moments = [=](const Tensor& xv) {
    auto& [mean, var] = *moments;
    mean.assign(layout.channels, 0.0);
    var.assign(layout.channels, 0.0);
    for (std::size_t c = 0; c < layout.channels; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < layout.batch; ++b) {
        const std::size_t base = (b * layout.channels + c) * layout.spatial;
        for (std::size_t i = 0; i < layout.spatial; ++i) s += xv[base + i];
      }
      mean[c] = s / static_cast<double>(per_channel);
      double v = 0.0;
      for (std::size_t b = 0; b < layout.batch; ++b) {
        const std::size_t base = (b * layout.channels + c) * layout.spatial;
        for (std::size_t i = 0; i < layout.spatial; ++i) {
          const double d = xv[base + i] - mean[c];
          v += d * d;
        }
      }
      var[c] = v / static_cast<double>(per_channel);
    }
  };

  auto node = make_op(
      "batchnorm", {x, gamma, beta},
      [=](const std::vector<Var>& p) {
        const Tensor& xv = p[0]->value();
        compute_moments(xv);
        const auto& [mean, var] = *moments;
        Tensor out(xv.shape());
        for (std::size_t b = 0; b < layout.batch; ++b)
          for (std::size_t c = 0; c < layout.channels; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + eps);
            const double g = p[1]->value()[c], be = p[2]->value()[c];
            const std::size_t base = (b * layout.channels + c) * layout.spatial;
            for (std::size_t i = 0; i < layout.spatial; ++i) {
              out[base + i] = g * (xv[base + i] - mean[c]) * inv + be;
            }
          }
        return out;
      },
      [=](const DiffNode& self, const std::vector<Var>& p) {
        const auto& [mean, var] = *moments;
        auto g = self.grad().data();
        auto xv = p[0]->value().data();
        const double n = static_cast<double>(per_channel);
        for (std::size_t c = 0; c < layout.channels; ++c) {
          const double inv = 1.0 / std::sqrt(var[c] + eps);
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < layout.batch; ++b) {
            const std::size_t base = (b * layout.channels + c) * layout.spatial;
            for (std::size_t i = 0; i < layout.spatial; ++i) {
              const double xhat = (xv[base + i] - mean[c]) * inv;
              sum_g += g[base + i];
              sum_gx += g[base + i] * xhat;
            }
          }
          if (p[1]->requires_grad()) p[1]->grad_buffer()[c] += sum_gx;
          if (p[2]->requires_grad()) p[2]->grad_buffer()[c] += sum_g;
          if (p[0]->requires_grad()) {
            auto dx = p[0]->grad_buffer();
            const double k = p[1]->value()[c] * inv;
            for (std::size_t b = 0; b < layout.batch; ++b) {
              const std::size_t base = (b * layout.channels + c) * layout.spatial;
              for (std::size_t i = 0; i < layout.spatial; ++i) {
                const double xhat = (xv[base + i] - mean[c]) * inv;
                dx[base + i] += k * (g[base + i] - sum_g / n - xhat * sum_gx / n);
              }
            }
          }
        }
      });

  const auto& [mean, var] = *moments;
  const double unbias = per_channel > 1 ? static_cast<double>(per_channel) / static_cast<double>(per_channel - 1) : 1.0;
  for (std::size_t c = 0; c < layout.channels; ++c) {
    state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
    state.running_var[c] =
        state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c] * unbias;
  }
  return node;
}

}  // namespace voxbayes
