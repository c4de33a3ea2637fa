// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/bayes.hpp"

#include <cmath>

#include "voxbayes/errors.hpp"

namespace voxbayes {

namespace {

double softplus_value(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor normal_fill(const Shape& shape, Rng& rng, double scale) {
  Tensor t(shape);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

std::size_t z_dim_of(const Shape& weight_shape) { return weight_shape.at(0); }

/// Shape that broadcasts a (1, D) latent along axis 0 of the weight.
Shape latent_view(const Shape& weight_shape) {
  Shape s(weight_shape.size(), 1);
  s[0] = weight_shape[0];
  return s;
}

void check_mnf(const MnfLayerParams& params) {
  const Shape& ws = params.posterior.mu->shape();
  if (params.flow.dim != z_dim_of(ws)) {
    throw ConfigError("mnf: flow dimension " + std::to_string(params.flow.dim) +
                      " does not match weight axis 0 of " + shape_str(ws));
  }
  if (params.aux.inverse_flow.dim != params.flow.dim) {
    throw ConfigError("mnf: auxiliary flow dimension differs from the latent dimension");
  }
}

void check_dense_input(const char* op, const Var& input, const Shape& ws) {
  const Shape& s = input->shape();
  if (s.size() != 2 || s[1] != ws[0]) {
    throw ShapeError(std::string(op) + ": input " + shape_str(s) + " does not match weights " +
                     shape_str(ws));
  }
}

void check_conv_input(const char* op, const Var& input, const Shape& ws) {
  const Shape& s = input->shape();
  if (s.size() != 5 || ws.size() != 5 || s[1] != ws[1]) {
    throw ShapeError(std::string(op) + ": input " + shape_str(s) + " does not match kernels " +
                     shape_str(ws));
  }
}

}  // namespace

Var GaussianPosterior::sigma() const { return ad::softplus(rho); }

double inverse_softplus(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("inverse_softplus: sigma must be positive");
  return sigma > 30.0 ? sigma : std::log(std::expm1(sigma));
}

GaussianPosterior make_gaussian_posterior(const Shape& shape, std::size_t fan_in, Rng& rng,
                                          double sigma0) {
  if (fan_in == 0) throw ConfigError("make_gaussian_posterior: fan_in must be >= 1");
  GaussianPosterior post;
  post.mu = parameter(normal_fill(shape, rng, std::sqrt(2.0 / static_cast<double>(fan_in))));
  post.rho = parameter(Tensor(shape, inverse_softplus(sigma0)));
  return post;
}

std::vector<std::pair<std::string, Var>> MnfLayerParams::named_parameters(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, Var>> out{
      {prefix + ".mu", posterior.mu},  {prefix + ".rho", posterior.rho},
      {prefix + ".z_mu", z_mu},        {prefix + ".z_rho", z_rho},
      {prefix + ".aux.c", aux.c},      {prefix + ".aux.b1", aux.b1},
      {prefix + ".aux.b2", aux.b2},
  };
  for (auto& p : flow.named_parameters(prefix + ".flow")) out.push_back(std::move(p));
  for (auto& p : aux.inverse_flow.named_parameters(prefix + ".aux.flow")) out.push_back(std::move(p));
  return out;
}

MnfLayerParams make_mnf_params(const Shape& weight_shape, std::size_t fan_in, Rng& rng,
                               const MnfOptions& options) {
  if (weight_shape.size() < 2) throw ShapeError("make_mnf_params: weights need rank >= 2");
  const std::size_t d = z_dim_of(weight_shape);
  const std::size_t p = numel(weight_shape) / d;
  MnfLayerParams m;
  m.posterior = make_gaussian_posterior(weight_shape, fan_in, rng, options.sigma0);
  m.z_mu = parameter(Tensor(Shape{1, d}, 1.0));
  m.z_rho = parameter(Tensor(Shape{1, d}, inverse_softplus(options.z_sigma0)));
  m.flow = make_flow(d, rng, options.flow);
  m.aux.c = parameter(normal_fill({p, 1}, rng, 1.0));
  m.aux.b1 = parameter(normal_fill({1, d}, rng, 0.1));
  m.aux.b2 = parameter(normal_fill({1, d}, rng, 0.1));
  m.aux.inverse_flow = make_flow(d, rng, options.flow);
  return m;
}

// ---------------------------------------------------------------------------

void KlLedger::record(const std::string& id, Var kl) {
  for (const auto& [name, _] : entries_) {
    if (name == id) throw GraphError("KlLedger: layer '" + id + "' already contributed in this pass");
  }
  if (kl->value().size() != 1) {
    throw ShapeError("KlLedger: contribution of '" + id + "' must be a scalar, got " +
                     shape_str(kl->shape()));
  }
  entries_.emplace_back(id, ad::reshape(kl, {}));
}

Var KlLedger::total() const {
  if (entries_.empty()) return constant(0.0);
  Var acc = entries_.front().second;
  for (std::size_t i = 1; i < entries_.size(); ++i) acc = ad::add(acc, entries_[i].second);
  return acc;
}

std::map<std::string, double> KlLedger::values() const {
  std::map<std::string, double> out;
  for (const auto& [name, v] : entries_) out[name] = v->value().item();
  return out;
}

// ---------------------------------------------------------------------------

Var sample_reparameterized(const GaussianPosterior& post, Rng& rng) {
  return sample_reparameterized(post, rng.normal_tensor(post.mu->shape()));
}

Var sample_reparameterized(const GaussianPosterior& post, const Tensor& eps) {
  if (eps.shape() != post.mu->shape()) {
    throw ShapeError("sample_reparameterized: noise " + shape_str(eps.shape()) +
                     " does not match " + shape_str(post.mu->shape()));
  }
  return ad::add(post.mu, ad::mul(post.sigma(), constant(eps)));
}

Var kl_normal_vs_standard_normal(const Var& mean, const Var& rho) {
  if (mean->shape() != rho->shape()) {
    throw ShapeError("kl: mean " + shape_str(mean->shape()) + " vs rho " + shape_str(rho->shape()));
  }
  return make_op(
      "kl_normal", {mean, rho},
      [](const std::vector<Var>& p) {
        auto m = p[0]->value().data();
        auto r = p[1]->value().data();
        double acc = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double s = softplus_value(r[i]);
          if (!(s > 0.0)) throw NumericalError("kl: posterior scale underflowed to zero");
          acc += 0.5 * (m[i] * m[i] + s * s - 1.0) - std::log(s);
        }
        if (!std::isfinite(acc)) throw NumericalError("kl: produced a non-finite value");
        return Tensor::scalar(acc);
      },
      [](const DiffNode& self, const std::vector<Var>& p) {
        const double g = self.grad().item();
        auto m = p[0]->value().data();
        auto r = p[1]->value().data();
        if (p[0]->requires_grad()) {
          auto gm = p[0]->grad_buffer();
          for (std::size_t i = 0; i < m.size(); ++i) gm[i] += g * m[i];
        }
        if (p[1]->requires_grad()) {
          auto gr = p[1]->grad_buffer();
          for (std::size_t i = 0; i < r.size(); ++i) {
            const double s = softplus_value(r[i]);
            gr[i] += g * (s - 1.0 / s) * sigmoid_value(r[i]);
          }
        }
      });
}

Var kl_gaussian_vs_standard_normal(const GaussianPosterior& post) {
  return kl_normal_vs_standard_normal(post.mu, post.rho);
}

// ---------------------------------------------------------------------------
// Dense

Var dense_forward(const Var& input, const Var& weights) {
  check_dense_input("dense", input, weights->shape());
  return ad::matmul(input, weights);
}

Var reparam_dense_forward(const Var& input, const GaussianPosterior& post, Rng& rng) {
  check_dense_input("reparam_dense", input, post.mu->shape());
  return ad::matmul(input, sample_reparameterized(post, rng));
}

Var flipout_dense(const Var& input, const Var& mu, const Var& delta, const Tensor& r,
                  const Tensor& s) {
  check_dense_input("flipout_dense", input, mu->shape());
  const std::size_t batch = input->shape()[0];
  if (r.shape() != Shape{batch, mu->shape()[1]} || s.shape() != input->shape()) {
    throw ShapeError("flipout_dense: sign matrices " + shape_str(r.shape()) + ", " +
                     shape_str(s.shape()) + " do not match the batch");
  }
  const Var mean = ad::matmul(input, mu);
  const Var pert = ad::matmul(ad::mul(input, constant(s)), delta);
  return ad::add(mean, ad::mul(pert, constant(r)));
}

Var flipout_dense_forward(const Var& input, const GaussianPosterior& post, Rng& rng) {
  check_dense_input("flipout_dense", input, post.mu->shape());
  const Shape& ws = post.mu->shape();
  const std::size_t batch = input->shape()[0];
  const Var delta = ad::mul(post.sigma(), constant(rng.normal_tensor(ws)));
  const Tensor r = rng.rademacher_tensor({batch, ws[1]});
  const Tensor s = rng.rademacher_tensor({batch, ws[0]});
  return flipout_dense(input, post.mu, delta, r, s);
}

Var local_reparam_dense_forward(const Var& input, const GaussianPosterior& post, Rng& rng) {
  check_dense_input("local_reparam_dense", input, post.mu->shape());
  const Var mean = ad::matmul(input, post.mu);
  const Var var = ad::matmul(ad::square(input), ad::square(post.sigma()));
  const Tensor eps = rng.normal_tensor(mean->shape());
  return ad::add(mean, ad::mul(ad::sqrt(var), constant(eps)));
}

Var mnf_dense_forward(const Var& input, const MnfLayerParams& params, Rng& rng, KlLedger& ledger,
                      const std::string& id) {
  check_mnf(params);
  check_dense_input("mnf_dense", input, params.posterior.mu->shape());
  const MnfDraw d = draw_mnf_weights(params, rng);
  ledger.record(id, kl_mnf_bound(params, d.weights, d.z0, d.zK, d.log_det));
  return ad::matmul(input, d.weights);
}

// ---------------------------------------------------------------------------
// Conv

Var reparam_conv3d_forward(const Var& input, const GaussianPosterior& post, Rng& rng,
                           ad::Conv3dOptions options) {
  check_conv_input("reparam_conv3d", input, post.mu->shape());
  return ad::conv3d(input, sample_reparameterized(post, rng), options);
}

Var local_reparam_conv3d_forward(const Var& input, const GaussianPosterior& post, Rng& rng,
                                 ad::Conv3dOptions options) {
  check_conv_input("local_reparam_conv3d", input, post.mu->shape());
  const Var mean = ad::conv3d(input, post.mu, options);
  const Var var = ad::conv3d(ad::square(input), ad::square(post.sigma()), options);
  const Tensor eps = rng.normal_tensor(mean->shape());
  return ad::add(mean, ad::mul(ad::sqrt(var), constant(eps)));
}

Var flipout_conv3d(const Var& input, const Var& mu, const Var& delta, const Tensor& r,
                   const Tensor& s, ad::Conv3dOptions options) {
  const Shape& ws = mu->shape();
  check_conv_input("flipout_conv3d", input, ws);
  if (delta->shape() != ws) throw ShapeError("flipout_conv3d: perturbation shape differs from kernels");
  const Shape& xs = input->shape();
  const std::size_t batch = xs[0];
  const std::size_t filters = ws[0];
  const std::size_t channels = ws[1];
  if (r.shape() != Shape{batch, filters} || s.shape() != Shape{batch, channels}) {
    throw ShapeError("flipout_conv3d: sign matrices " + shape_str(r.shape()) + ", " +
                     shape_str(s.shape()) + " do not match batch/filters/channels");
  }
  const Shape sample(xs.begin() + 1, xs.end());
  const auto geom = kernels::conv_geometry(sample, ws, options);
  const Shape out_shape{batch, filters, geom.axis[0].out, geom.axis[1].out, geom.axis[2].out};
  const std::size_t in_stride = numel(sample);
  const std::size_t out_stride = filters * geom.out_voxels();
  const std::size_t per_filter = numel(ws) / filters;
  const std::size_t ksize = per_filter / channels;

  auto build_kernel = [=](const double* m, const double* dl, std::size_t b, std::vector<double>& w) {
    w.resize(filters * per_filter);
    for (std::size_t f = 0; f < filters; ++f) {
      const double rf = r[b * filters + f];
      for (std::size_t c = 0; c < channels; ++c) {
        const double sign = rf * s[b * channels + c];
        const std::size_t base = (f * channels + c) * ksize;
        for (std::size_t k = 0; k < ksize; ++k) w[base + k] = m[base + k] + dl[base + k] * sign;
      }
    }
  };

  return make_op(
      "flipout_conv3d", {input, mu, delta},
      [=](const std::vector<Var>& p) {
        Tensor out(out_shape);
        std::vector<double> scratch, w;
        const double* xv = p[0]->value().data().data();
        for (std::size_t b = 0; b < batch; ++b) {
          build_kernel(p[1]->value().data().data(), p[2]->value().data().data(), b, w);
          kernels::conv3d_forward(geom, xv + b * in_stride, w.data(),
                                  out.data().data() + b * out_stride, scratch);
        }
        return out;
      },
      [=](const DiffNode& self, const std::vector<Var>& p) {
        std::vector<double> scratch, w, dw(numel(ws));
        const double* xv = p[0]->value().data().data();
        const double* g = self.grad().data().data();
        double* dx = p[0]->requires_grad() ? p[0]->grad_buffer().data() : nullptr;
        const bool need_w = p[1]->requires_grad() || p[2]->requires_grad();
        for (std::size_t b = 0; b < batch; ++b) {
          build_kernel(p[1]->value().data().data(), p[2]->value().data().data(), b, w);
          if (need_w) std::fill(dw.begin(), dw.end(), 0.0);
          kernels::conv3d_backward(geom, xv + b * in_stride, w.data(), g + b * out_stride,
                                   need_w ? dw.data() : nullptr, dx ? dx + b * in_stride : nullptr,
                                   scratch);
          if (!need_w) continue;
          if (p[1]->requires_grad()) {
            auto gm = p[1]->grad_buffer();
            for (std::size_t i = 0; i < dw.size(); ++i) gm[i] += dw[i];
          }
          if (p[2]->requires_grad()) {
            auto gd = p[2]->grad_buffer();
            for (std::size_t f = 0; f < filters; ++f) {
              const double rf = r[b * filters + f];
              for (std::size_t c = 0; c < channels; ++c) {
                const double sign = rf * s[b * channels + c];
                const std::size_t base = (f * channels + c) * ksize;
                for (std::size_t k = 0; k < ksize; ++k) gd[base + k] += dw[base + k] * sign;
              }
            }
          }
        }
      });
}

Var flipout_conv3d_forward(const Var& input, const GaussianPosterior& post, Rng& rng,
                           ad::Conv3dOptions options) {
  const Shape& ws = post.mu->shape();
  check_conv_input("flipout_conv3d", input, ws);
  const std::size_t batch = input->shape()[0];
  const Var delta = ad::mul(post.sigma(), constant(rng.normal_tensor(ws)));
  const Tensor r = rng.rademacher_tensor({batch, ws[0]});
  const Tensor s = rng.rademacher_tensor({batch, ws[1]});
  return flipout_conv3d(input, post.mu, delta, r, s, options);
}

Var mnf_conv3d_forward(const Var& input, const MnfLayerParams& params, Rng& rng, KlLedger& ledger,
                       const std::string& id, ad::Conv3dOptions options) {
  check_mnf(params);
  check_conv_input("mnf_conv3d", input, params.posterior.mu->shape());
  const MnfDraw d = draw_mnf_weights(params, rng);
  ledger.record(id, kl_mnf_bound(params, d.weights, d.z0, d.zK, d.log_det));
  return ad::conv3d(input, d.weights, options);
}

// ---------------------------------------------------------------------------
// MNF

namespace {

Var scaled_mean(const MnfLayerParams& params, const Var& zK) {
  const Shape& ws = params.posterior.mu->shape();
  return ad::mul(params.posterior.mu, ad::broadcast_to(ad::reshape(zK, latent_view(ws)), ws));
}

}  // namespace

MnfDraw draw_mnf_weights(const MnfLayerParams& params, Rng& rng) {
  const Tensor eps_z = rng.normal_tensor(params.z_mu->shape());
  const Tensor eps_w = rng.normal_tensor(params.posterior.mu->shape());
  return draw_mnf_weights(params, eps_z, eps_w);
}

MnfDraw draw_mnf_weights(const MnfLayerParams& params, const Tensor& eps_z, const Tensor& eps_w) {
  check_mnf(params);
  if (eps_z.shape() != params.z_mu->shape() || eps_w.shape() != params.posterior.mu->shape()) {
    throw ShapeError("draw_mnf_weights: noise shapes do not match the layer");
  }
  MnfDraw d;
  d.z0 = ad::add(params.z_mu, ad::mul(ad::softplus(params.z_rho), constant(eps_z)));
  auto fwd = flow_forward(d.z0, params.flow);
  d.zK = fwd.z;
  d.log_det = fwd.log_det;
  d.mean = scaled_mean(params, d.zK);
  d.weights = ad::add(d.mean, ad::mul(params.posterior.sigma(), constant(eps_w)));
  return d;
}

MnfDraw mnf_mean_weights(const MnfLayerParams& params) {
  check_mnf(params);
  MnfDraw d;
  d.z0 = params.z_mu;
  auto fwd = flow_forward(d.z0, params.flow);
  d.zK = fwd.z;
  d.log_det = fwd.log_det;
  d.mean = scaled_mean(params, d.zK);
  d.weights = d.mean;
  return d;
}

Var mnf_log_qz(const MnfLayerParams& params, const Var& z0, const Var& log_det_fwd) {
  const Var var = ad::square(ad::softplus(params.z_rho));
  return ad::sub(gaussian_log_density_rows(z0, params.z_mu, var), log_det_fwd);
}

Var mnf_aux_log_density(const MnfLayerParams& params, const Var& weights, const Var& zK) {
  const Shape& ws = weights->shape();
  const std::size_t d = z_dim_of(ws);
  const std::size_t p = numel(ws) / d;
  if (params.aux.c->shape() != Shape{p, 1}) {
    throw ShapeError("mnf: auxiliary projection " + shape_str(params.aux.c->shape()) +
                     " does not match weights " + shape_str(ws));
  }
  const Var v = ad::reshape(weights, {d, p});
  const Var h = ad::reshape(ad::tanh(ad::scale(ad::matmul(v, params.aux.c), 1.0 / static_cast<double>(p))),
                            {1, d});
  const Var mean = ad::mul(params.aux.b1, h);
  const Var var = ad::sigmoid(ad::mul(params.aux.b2, h));
  auto back = flow_forward(zK, params.aux.inverse_flow);
  return ad::add(gaussian_log_density_rows(back.z, mean, var), back.log_det);
}

Var kl_mnf_bound(const MnfLayerParams& params, const Var& weights, const Var& z0, const Var& zK,
                 const Var& log_det_fwd) {
  check_mnf(params);
  const Var kl_w = kl_normal_vs_standard_normal(scaled_mean(params, zK), params.posterior.rho);
  const Var log_q = ad::reshape(mnf_log_qz(params, z0, log_det_fwd), {});
  const Var log_r = ad::reshape(mnf_aux_log_density(params, weights, zK), {});
  Var kl = ad::sub(ad::add(kl_w, log_q), log_r);
  if (!kl->value().all_finite()) throw NumericalError("kl_mnf_bound: non-finite estimate");
  return kl;
}

// ---------------------------------------------------------------------------

Var mc_dropout_forward(const Var& input, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  if (rate == 0.0) return input;
  Tensor mask(input->shape());
  const double keep = 1.0 - rate;
  for (auto& m : mask.data()) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return ad::mul(input, constant(std::move(mask)));
}

}  // namespace voxbayes
