// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/network.hpp"

#include <cmath>

#include "voxbayes/errors.hpp"

namespace voxbayes {

namespace {

Tensor he_normal(const Shape& shape, std::size_t fan_in, Rng& rng) {
  Tensor t(shape);
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

Var add_bias(const Var& y, const Var& bias) {
  const Shape& ys = y->shape();
  Shape view(ys.size() - 1, 1);
  view[0] = bias->shape()[0];
  return ad::add(y, ad::broadcast_to(ad::reshape(bias, view), ys));
}

}  // namespace

Model::Model(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  const auto shapes = infer_shapes(spec_);
  const Rng root(seed);
  Shape in{1, spec_.input_shape[0], spec_.input_shape[1], spec_.input_shape[2]};
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    Rng rng = root.derive(i);
    LayerParams p;
    if (l.kind == LayerKind::conv3d || l.kind == LayerKind::dense) {
      Shape ws;
      std::size_t fan_in = 0;
      if (l.kind == LayerKind::conv3d) {
        ws = {l.filters, in[0], l.kernel, l.kernel, l.kernel};
        fan_in = in[0] * l.kernel * l.kernel * l.kernel;
      } else {
        ws = {in[0], l.filters};
        fan_in = in[0];
      }
      switch (l.variant) {
        case BayesVariant::none:
          p.weights = parameter(he_normal(ws, fan_in, rng));
          break;
        case BayesVariant::reparam:
        case BayesVariant::local_reparam:
        case BayesVariant::flipout:
          p.posterior = make_gaussian_posterior(ws, fan_in, rng);
          break;
        case BayesVariant::mnf:
          p.mnf = make_mnf_params(ws, fan_in, rng);
          break;
      }
      p.bias = parameter(Tensor(Shape{l.filters}, 0.0));
    } else if (l.kind == LayerKind::batchnorm) {
      p.gamma = parameter(Tensor(Shape{in[0]}, 1.0));
      p.beta = parameter(Tensor(Shape{in[0]}, 0.0));
      p.bn = BatchNormState(in[0]);
    }
    layers_.push_back(std::move(p));
    in = shapes[i];
  }
}

bool Model::is_bayesian() const {
  for (const auto& l : spec_.layers) {
    if (l.is_bayesian()) return true;
  }
  return false;
}

bool Model::is_stochastic() const {
  for (const auto& l : spec_.layers) {
    if (l.is_bayesian() || (l.kind == LayerKind::dropout && l.rate > 0.0)) return true;
  }
  return false;
}

Var Model::forward(const Var& input, ForwardMode mode, Rng& rng, KlLedger* ledger) {
  const Shape& s = input->shape();
  const Shape want{1, spec_.input_shape[0], spec_.input_shape[1], spec_.input_shape[2]};
  if (s.size() != 5 || Shape(s.begin() + 1, s.end()) != want || s[0] == 0) {
    throw ShapeError("model input must be [B," + shape_str(want).substr(1) + ", got " + shape_str(s));
  }
  if (mode == ForwardMode::train && ledger == nullptr && is_bayesian()) {
    throw ConfigError("train-mode forward of a Bayesian model needs a KL ledger");
  }
  Var x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) x = apply_layer(i, x, mode, rng, ledger);
  return x;
}

Var Model::apply_layer(std::size_t index, const Var& x, ForwardMode mode, Rng& rng,
                       KlLedger* ledger) {
  const LayerSpec& l = spec_.layers[index];
  LayerParams& p = layers_[index];
  const std::string id = "layer" + std::to_string(index);
  KlLedger scratch;
  KlLedger& kl = (mode == ForwardMode::train && ledger) ? *ledger : scratch;
  const bool stochastic = mode != ForwardMode::infer;

  switch (l.kind) {
    case LayerKind::conv3d:
    case LayerKind::dense: {
      const bool conv = l.kind == LayerKind::conv3d;
      const ad::Conv3dOptions opts{l.stride, l.padding};
      auto deterministic = [&](const Var& w) {
        return conv ? ad::conv3d(x, w, opts) : dense_forward(x, w);
      };
      Var y;
      switch (l.variant) {
        case BayesVariant::none:
          y = deterministic(p.weights);
          break;
        case BayesVariant::reparam:
        case BayesVariant::local_reparam:
        case BayesVariant::flipout:
          if (!stochastic) {
            y = deterministic(p.posterior.mu);
            break;
          }
          if (l.variant == BayesVariant::reparam) {
            y = conv ? reparam_conv3d_forward(x, p.posterior, rng, opts)
                     : reparam_dense_forward(x, p.posterior, rng);
          } else if (l.variant == BayesVariant::flipout) {
            y = conv ? flipout_conv3d_forward(x, p.posterior, rng, opts)
                     : flipout_dense_forward(x, p.posterior, rng);
          } else {
            y = conv ? local_reparam_conv3d_forward(x, p.posterior, rng, opts)
                     : local_reparam_dense_forward(x, p.posterior, rng);
          }
          if (mode == ForwardMode::train) kl.record(id, kl_gaussian_vs_standard_normal(p.posterior));
          break;
        case BayesVariant::mnf:
          if (!stochastic) {
            y = deterministic(mnf_mean_weights(p.mnf).weights);
          } else if (mode == ForwardMode::train) {
            y = conv ? mnf_conv3d_forward(x, p.mnf, rng, kl, id, opts)
                     : mnf_dense_forward(x, p.mnf, rng, kl, id);
          } else {
            y = deterministic(draw_mnf_weights(p.mnf, rng).weights);
          }
          break;
      }
      y = add_bias(y, p.bias);
      return l.activation == Activation::relu ? ad::relu(y) : y;
    }
    case LayerKind::maxpool3d:
      return ad::maxpool3d(x, {l.pool, l.pool, l.pool});
    case LayerKind::batchnorm:
      return batchnorm(x, p.gamma, p.beta, p.bn,
                       mode == ForwardMode::train ? BatchNormMode::train : BatchNormMode::infer);
    case LayerKind::relu:
      return ad::relu(x);
    case LayerKind::dropout:
      return stochastic ? mc_dropout_forward(x, l.rate, rng) : x;
    case LayerKind::global_maxpool: {
      const Shape& s = x->shape();
      const Var pooled = ad::maxpool3d(x, {s[2], s[3], s[4]});
      return ad::reshape(pooled, {s[0], s[1]});
    }
    case LayerKind::sigmoid_head:
      return ad::reshape(ad::sigmoid(x), {x->shape()[0]});
  }
  throw ConfigError("unhandled layer kind");
}

std::vector<std::pair<std::string, Var>> Model::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const LayerParams& p = layers_[i];
    const std::string prefix = "layer" + std::to_string(i) + "." + l.kind_name();
    if (l.kind == LayerKind::conv3d || l.kind == LayerKind::dense) {
      switch (l.variant) {
        case BayesVariant::none:
          out.emplace_back(prefix + ".weights", p.weights);
          break;
        case BayesVariant::reparam:
        case BayesVariant::local_reparam:
        case BayesVariant::flipout:
          out.emplace_back(prefix + ".mu", p.posterior.mu);
          out.emplace_back(prefix + ".rho", p.posterior.rho);
          break;
        case BayesVariant::mnf:
          for (auto& np : p.mnf.named_parameters(prefix)) out.push_back(std::move(np));
          break;
      }
      out.emplace_back(prefix + ".bias", p.bias);
    } else if (l.kind == LayerKind::batchnorm) {
      out.emplace_back(prefix + ".gamma", p.gamma);
      out.emplace_back(prefix + ".beta", p.beta);
    }
  }
  return out;
}

std::vector<Var> Model::parameters() const {
  std::vector<Var> out;
  for (auto& [_, v] : named_parameters()) out.push_back(v);
  return out;
}

std::map<std::string, Tensor> Model::state() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : named_parameters()) out.emplace(name, v->value());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.kind != LayerKind::batchnorm) continue;
    const std::string prefix = "layer" + std::to_string(i) + "." + l.kind_name();
    out.emplace(prefix + ".running_mean", layers_[i].bn.running_mean);
    out.emplace(prefix + ".running_var", layers_[i].bn.running_var);
  }
  return out;
}

void Model::load_state(const std::map<std::string, Tensor>& state) {
  std::size_t used = 0;
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = state.find(name);
    if (it == state.end()) throw FormatError("checkpoint is missing array '" + name + "'");
    if (it->second.shape() != shape) {
      throw FormatError("checkpoint array '" + name + "' has shape " + shape_str(it->second.shape()) +
                        ", model expects " + shape_str(shape));
    }
    ++used;
    return it->second;
  };
  for (const auto& [name, v] : named_parameters()) v->set_value(fetch(name, v->shape()));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.kind != LayerKind::batchnorm) continue;
    const std::string prefix = "layer" + std::to_string(i) + "." + l.kind_name();
    auto& bn = layers_[i].bn;
    bn.running_mean = fetch(prefix + ".running_mean", bn.running_mean.shape());
    bn.running_var = fetch(prefix + ".running_var", bn.running_var.shape());
  }
  if (used != state.size()) throw FormatError("checkpoint has arrays the model does not use");
}

Tensor stack_volumes(const std::vector<const Volume*>& volumes) {
  if (volumes.empty()) throw ShapeError("stack_volumes: no volumes");
  const Shape& s = volumes.front()->shape();
  if (s.size() != 3) throw ShapeError("stack_volumes: volumes must be rank 3, got " + shape_str(s));
  Tensor out(Shape{volumes.size(), 1, s[0], s[1], s[2]});
  const std::size_t n = numel(s);
  for (std::size_t b = 0; b < volumes.size(); ++b) {
    const Volume& v = *volumes[b];
    if (v.shape() != s) {
      throw ShapeError("stack_volumes: " + (v.source.empty() ? "volume" : v.source) + " has shape " +
                       shape_str(v.shape()) + ", expected " + shape_str(s));
    }
    std::copy(v.voxels.data().begin(), v.voxels.data().end(), out.data().begin() + b * n);
  }
  return out;
}

}  // namespace voxbayes
