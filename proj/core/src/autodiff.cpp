// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include "voxbayes/autodiff.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "voxbayes/errors.hpp"

namespace voxbayes {

// ---------------------------------------------------------------------------
// DiffNode and graph traversal

const Tensor& DiffNode::grad() const {
  if (!grad_ready_) {
    grad_ = Tensor(value_.shape(), 0.0);
    grad_ready_ = true;
  }
  return grad_;
}

void DiffNode::ensure_grad() {
  grad_ = Tensor(value_.shape(), 0.0);
  grad_ready_ = true;
}

void DiffNode::set_value(Tensor value) {
  if (!is_leaf()) throw GraphError("set_value: only leaf values can be replaced");
  if (value.shape() != value_.shape()) {
    throw ShapeError("set_value: shape " + shape_str(value.shape()) + " differs from " +
                     shape_str(value_.shape()));
  }
  value_ = std::move(value);
}

void DiffNode::accumulate_grad(const Tensor& g) {
  if (g.shape() != value_.shape()) {
    throw ShapeError(op_ + ": gradient shape " + shape_str(g.shape()) + " vs value " +
                     shape_str(value_.shape()));
  }
  auto dst = grad_buffer();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::span<double> DiffNode::grad_buffer() {
  if (!grad_ready_) ensure_grad();
  return grad_.data();
}

Var make_leaf(Tensor value, bool requires_grad, std::string op) {
  auto node = std::make_shared<DiffNode>();
  node->value_ = std::move(value);
  node->requires_grad_ = requires_grad;
  node->op_ = std::move(op);
  return node;
}

Var parameter(Tensor value) { return make_leaf(std::move(value), true, "parameter"); }
Var constant(Tensor value) { return make_leaf(std::move(value), false, "constant"); }
Var constant(double v) { return constant(Tensor::scalar(v)); }

Var make_op(std::string op, std::vector<Var> parents, DiffNode::Recompute recompute,
            DiffNode::Backprop backprop) {
  auto node = std::make_shared<DiffNode>();
  node->op_ = std::move(op);
  node->requires_grad_ =
      std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p->requires_grad(); });
  node->value_ = recompute(parents);
  node->parents_ = std::move(parents);
  node->recompute_ = std::move(recompute);
  node->backprop_ = std::move(backprop);
  return node;
}

std::vector<DiffNode*> topological_order(const Var& root) {
  std::vector<DiffNode*> order;
  std::unordered_set<const DiffNode*> visited;
  std::vector<std::pair<DiffNode*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents().size()) {
      DiffNode* parent = node->parents()[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

Tensor forward(const Var& root) {
  for (DiffNode* node : topological_order(root)) {
    if (!node->is_leaf()) node->value_ = node->recompute_(node->parents_);
  }
  return root->value_;
}

GradientMap backward(const Var& root) {
  if (root->value_.size() != 1 || root->value_.rank() > 1) {
    throw GraphError("backward: root must have shape [] or [1], got " + shape_str(root->shape()));
  }
  if (root->backward_done_) {
    throw GraphError("backward: called twice on the same graph without reset");
  }
  auto order = topological_order(root);
  for (DiffNode* node : order) {
    if (node->requires_grad_) node->ensure_grad();
  }
  GradientMap grads;
  if (root->requires_grad_) {
    root->grad_[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      DiffNode* node = *it;
      if (!node->is_leaf() && node->requires_grad_ && node->backprop_) {
        node->backprop_(*node, node->parents_);
      }
    }
  }
  for (DiffNode* node : order) {
    if (node->is_leaf() && node->requires_grad_) grads.emplace(node, node->grad_);
  }
  root->backward_done_ = true;
  return grads;
}

void reset(const Var& root) {
  for (DiffNode* node : topological_order(root)) {
    node->grad_ready_ = false;
    node->grad_ = Tensor();
    node->backward_done_ = false;
  }
}

// ---------------------------------------------------------------------------
// Convolution kernels

namespace kernels {

AxisGeometry conv_axis(std::size_t extent, std::size_t kernel, std::size_t stride,
                       ad::Padding padding) {
  AxisGeometry g;
  if (padding == ad::Padding::valid) {
    if (kernel > extent) {
      throw ShapeError("conv3d: kernel extent " + std::to_string(kernel) +
                       " larger than padded input extent " + std::to_string(extent));
    }
    g.out = (extent - kernel) / stride + 1;
    return g;
  }
  g.out = (extent + stride - 1) / stride;
  const std::size_t needed = (g.out - 1) * stride + kernel;
  const std::size_t total = needed > extent ? needed - extent : 0;
  g.pad_lo = total / 2;
  if (extent + total < kernel) {
    throw ShapeError("conv3d: kernel extent " + std::to_string(kernel) +
                     " larger than padded input extent " + std::to_string(extent + total));
  }
  return g;
}

void set_num_threads(int threads) {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  openblas_set_num_threads(threads);
}

ConvGeometry conv_geometry(const Shape& sample_shape, const Shape& kernel_shape,
                           ad::Conv3dOptions options) {
  if (sample_shape.size() != 4 || kernel_shape.size() != 5) {
    throw ShapeError("conv3d: expected input (C,X,Y,Z) and kernels (F,C,kx,ky,kz), got " +
                     shape_str(sample_shape) + " and " + shape_str(kernel_shape));
  }
  if (sample_shape[0] != kernel_shape[1]) {
    throw ShapeError("conv3d: input channels " + shape_str(sample_shape) +
                     " do not match kernel channels " + shape_str(kernel_shape));
  }
  if (options.stride == 0) throw ConfigError("conv3d: stride must be >= 1");
  ConvGeometry g;
  g.channels = sample_shape[0];
  g.filters = kernel_shape[0];
  g.stride = options.stride;
  for (int a = 0; a < 3; ++a) {
    g.in[a] = sample_shape[a + 1];
    g.kernel[a] = kernel_shape[a + 2];
    g.axis[a] = conv_axis(g.in[a], g.kernel[a], g.stride, options.padding);
  }
  return g;
}

namespace {

void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const auto [ox, oy, oz] = std::array{g.axis[0].out, g.axis[1].out, g.axis[2].out};
  const std::size_t n = ox * oy * oz;
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* xc = x + c * g.in_voxels();
    for (std::size_t i = 0; i < g.kernel[0]; ++i) {
      for (std::size_t j = 0; j < g.kernel[1]; ++j) {
        for (std::size_t l = 0; l < g.kernel[2]; ++l, ++row) {
          double* dst = cols + row * n;
          for (std::size_t a = 0; a < ox; ++a) {
            const long ix = static_cast<long>(a * g.stride + i) - static_cast<long>(g.axis[0].pad_lo);
            for (std::size_t b = 0; b < oy; ++b) {
              const long iy =
                  static_cast<long>(b * g.stride + j) - static_cast<long>(g.axis[1].pad_lo);
              double* out = dst + (a * oy + b) * oz;
              if (ix < 0 || ix >= static_cast<long>(g.in[0]) || iy < 0 ||
                  iy >= static_cast<long>(g.in[1])) {
                std::fill(out, out + oz, 0.0);
                continue;
              }
              const double* src = xc + (static_cast<std::size_t>(ix) * g.in[1] +
                                        static_cast<std::size_t>(iy)) * g.in[2];
              for (std::size_t d = 0; d < oz; ++d) {
                const long iz =
                    static_cast<long>(d * g.stride + l) - static_cast<long>(g.axis[2].pad_lo);
                out[d] = (iz < 0 || iz >= static_cast<long>(g.in[2])) ? 0.0 : src[iz];
              }
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* dx) {
  const auto [ox, oy, oz] = std::array{g.axis[0].out, g.axis[1].out, g.axis[2].out};
  const std::size_t n = ox * oy * oz;
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* xc = dx + c * g.in_voxels();
    for (std::size_t i = 0; i < g.kernel[0]; ++i) {
      for (std::size_t j = 0; j < g.kernel[1]; ++j) {
        for (std::size_t l = 0; l < g.kernel[2]; ++l, ++row) {
          const double* src = cols + row * n;
          for (std::size_t a = 0; a < ox; ++a) {
            const long ix = static_cast<long>(a * g.stride + i) - static_cast<long>(g.axis[0].pad_lo);
            if (ix < 0 || ix >= static_cast<long>(g.in[0])) continue;
            for (std::size_t b = 0; b < oy; ++b) {
              const long iy =
                  static_cast<long>(b * g.stride + j) - static_cast<long>(g.axis[1].pad_lo);
              if (iy < 0 || iy >= static_cast<long>(g.in[1])) continue;
              const double* in = src + (a * oy + b) * oz;
              double* dst = xc + (static_cast<std::size_t>(ix) * g.in[1] +
                                  static_cast<std::size_t>(iy)) * g.in[2];
              for (std::size_t d = 0; d < oz; ++d) {
                const long iz =
                    static_cast<long>(d * g.stride + l) - static_cast<long>(g.axis[2].pad_lo);
                if (iz >= 0 && iz < static_cast<long>(g.in[2])) dst[iz] += in[d];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

void conv3d_forward(const ConvGeometry& g, const double* x, const double* w, double* y,
                    std::vector<double>& scratch) {
  const std::size_t k = g.patch();
  const std::size_t n = g.out_voxels();
  scratch.resize(k * n);
  im2col(g, x, scratch.data());
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(g.filters),
              static_cast<int>(n), static_cast<int>(k), 1.0, w, static_cast<int>(k),
              scratch.data(), static_cast<int>(n), 0.0, y, static_cast<int>(n));
}

void conv3d_backward(const ConvGeometry& g, const double* x, const double* w, const double* dy,
                     double* dw, double* dx, std::vector<double>& scratch) {
  const std::size_t k = g.patch();
  const std::size_t n = g.out_voxels();
  scratch.resize(k * n);
  if (dw) {
    im2col(g, x, scratch.data());
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(g.filters),
                static_cast<int>(k), static_cast<int>(n), 1.0, dy, static_cast<int>(n),
                scratch.data(), static_cast<int>(n), 1.0, dw, static_cast<int>(k));
  }
  if (dx) {
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(k),
                static_cast<int>(n), static_cast<int>(g.filters), 1.0, w, static_cast<int>(k),
                dy, static_cast<int>(n), 0.0, scratch.data(), static_cast<int>(n));
    col2im(g, scratch.data(), dx);
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Primitives

namespace ad {

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a->shape() != b->shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->shape()) + " vs " +
                     shape_str(b->shape()));
  }
}

void require_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) throw NumericalError(std::string(op) + ": produced a non-finite value");
}

/// Elementwise unary op; `df(x, y)` is the local derivative given input and output.
template <class F, class DF>
Var unary(const char* op, const Var& a, F f, DF df, bool check_finite = false) {
  return make_op(
      op, {a},
      [f, op, check_finite](const std::vector<Var>& p) {
        Tensor out(p[0]->shape());
        auto x = p[0]->value().data();
        auto y = out.data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
        if (check_finite) require_finite(op, out);
        return out;
      },
      [df](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        auto g = self.grad().data();
        auto x = p[0]->value().data();
        auto y = self.value().data();
        auto ga = p[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
      });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

struct BroadcastPlan {
  Shape out;
  std::array<std::size_t, kMaxRank> in_stride{};  // 0 on expanded axes
};

BroadcastPlan plan_broadcast(const Shape& in, const Shape& out) {
  if (in.size() > out.size()) {
    throw ShapeError("broadcast_to: cannot broadcast " + shape_str(in) + " to " + shape_str(out));
  }
  BroadcastPlan plan;
  plan.out = out;
  const std::size_t offset = out.size() - in.size();
  std::size_t stride = 1;
  for (std::size_t r = out.size(); r-- > 0;) {
    const std::size_t e = r >= offset ? in[r - offset] : 1;
    if (e != out[r] && e != 1) {
      throw ShapeError("broadcast_to: cannot broadcast " + shape_str(in) + " to " +
                       shape_str(out));
    }
    plan.in_stride[r] = (e == 1) ? 0 : stride;
    stride *= e;
  }
  return plan;
}

/// Calls fn(out_index, in_index) over the output in row-major order.
template <class Fn>
void for_each_broadcast(const BroadcastPlan& plan, Fn fn) {
  const std::size_t rank = plan.out.size();
  const std::size_t total = numel(plan.out);
  if (rank == 0) {
    fn(0, 0);
    return;
  }
  std::array<std::size_t, kMaxRank> idx{};
  std::size_t in = 0;
  for (std::size_t o = 0; o < total; ++o) {
    fn(o, in);
    for (std::size_t r = rank; r-- > 0;) {
      ++idx[r];
      in += plan.in_stride[r];
      if (idx[r] < plan.out[r]) break;
      in -= plan.in_stride[r] * idx[r];
      idx[r] = 0;
    }
  }
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(n));
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  return make_op(
      "add", {a, b},
      [](const std::vector<Var>& p) {
        Tensor out = p[0]->value();
        auto y = out.data();
        auto x = p[1]->value().data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        return out;
      },
      [](const DiffNode& self, const std::vector<Var>& p) {
        for (const auto& parent : p) {
          if (parent->requires_grad()) parent->accumulate_grad(self.grad());
        }
      });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  return make_op(
      "sub", {a, b},
      [](const std::vector<Var>& p) {
        Tensor out = p[0]->value();
        auto y = out.data();
        auto x = p[1]->value().data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] -= x[i];
        return out;
      },
      [](const DiffNode& self, const std::vector<Var>& p) {
        if (p[0]->requires_grad()) p[0]->accumulate_grad(self.grad());
        if (p[1]->requires_grad()) {
          auto g = self.grad().data();
          auto gb = p[1]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  return make_op(
      "mul", {a, b},
      [](const std::vector<Var>& p) {
        Tensor out = p[0]->value();
        auto y = out.data();
        auto x = p[1]->value().data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= x[i];
        return out;
      },
      [](const DiffNode& self, const std::vector<Var>& p) {
        auto g = self.grad().data();
        auto av = p[0]->value().data();
        auto bv = p[1]->value().data();
        if (p[0]->requires_grad()) {
          auto ga = p[0]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (p[1]->requires_grad()) {
          auto gb = p[1]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      });
}

Var div(const Var& a, const Var& b) {
  require_same_shape("div", a, b);
  return make_op(
      "div", {a, b},
      [](const std::vector<Var>& p) {
        Tensor out = p[0]->value();
        auto y = out.data();
        auto x = p[1]->value().data();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] /= x[i];
        require_finite("div", out);
        return out;
      },
      [](const DiffNode& self, const std::vector<Var>& p) {
        auto g = self.grad().data();
        auto bv = p[1]->value().data();
        auto y = self.value().data();
        if (p[0]->requires_grad()) {
          auto ga = p[0]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
        }
        if (p[1]->requires_grad()) {
          auto gb = p[1]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * y[i] / bv[i];
        }
      });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  return unary(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var shift(const Var& a, double c) {
  return unary(
      "shift", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var square(const Var& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var matmul(const Var& a, const Var& b) {
  if (a->shape().size() != 2 || b->shape().size() != 2 || a->shape()[1] != b->shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape()) + " and " +
                     shape_str(b->shape()));
  }
  const std::size_t m = a->shape()[0], k = a->shape()[1], n = b->shape()[1];
  return make_op(
      "matmul", {a, b},
      [m, k, n](const std::vector<Var>& p) {
        Tensor out(Shape{m, n});
        gemm(false, false, m, n, k, p[0]->value().data().data(), k, p[1]->value().data().data(),
             n, 0.0, out.data().data());
        return out;
      },
      [m, k, n](const DiffNode& self, const std::vector<Var>& p) {
        const double* g = self.grad().data().data();
        if (p[0]->requires_grad()) {
          // dA (m,k) += G (m,n) * B^T
          gemm(false, true, m, k, n, g, n, p[1]->value().data().data(), n, 1.0,
               p[0]->grad_buffer().data());
        }
        if (p[1]->requires_grad()) {
          // dB (k,n) += A^T * G
          gemm(true, false, k, n, m, p[0]->value().data().data(), k, g, n, 1.0,
               p[1]->grad_buffer().data());
        }
      });
}

Var transpose(const Var& a) {
  if (a->shape().size() != 2) {
    throw ShapeError("transpose: expected a matrix, got " + shape_str(a->shape()));
  }
  const std::size_t r = a->shape()[0], c = a->shape()[1];
  return make_op(
      "transpose", {a},
      [r, c](const std::vector<Var>& p) {
        Tensor out(Shape{c, r});
        auto x = p[0]->value().data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
        return out;
      },
      [r, c](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        auto g = self.grad().data();
        auto ga = p[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
      });
}

Var sigmoid(const Var& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(const Var& a) {
  return unary("softplus", a, stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Var log(const Var& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; },
      true);
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, true);
}

Var tanh(const Var& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sqrt(const Var& a) {
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; }, true);
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  return make_op(
      "sum", {a},
      [](const std::vector<Var>& p) {
        double s = 0.0;
        for (double v : p[0]->value().data()) s += v;
        return Tensor::scalar(s);
      },
      [](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        const double g = self.grad()[0];
        for (auto& v : p[0]->grad_buffer()) v += g;
      });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->value().size());
  return make_op(
      "mean", {a},
      [inv](const std::vector<Var>& p) {
        double s = 0.0;
        for (double v : p[0]->value().data()) s += v;
        return Tensor::scalar(s * inv);
      },
      [inv](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        const double g = self.grad()[0] * inv;
        for (auto& v : p[0]->grad_buffer()) v += g;
      });
}

Var broadcast_to(const Var& a, const Shape& shape) {
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a->shape(), shape));
  return make_op(
      "broadcast", {a},
      [plan](const std::vector<Var>& p) {
        Tensor out(plan->out);
        auto y = out.data();
        auto x = p[0]->value().data();
        for_each_broadcast(*plan, [&](std::size_t o, std::size_t i) { y[o] = x[i]; });
        return out;
      },
      [plan](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        auto g = self.grad().data();
        auto ga = p[0]->grad_buffer();
        for_each_broadcast(*plan, [&](std::size_t o, std::size_t i) { ga[i] += g[o]; });
      });
}

Var reshape(const Var& a, const Shape& shape) {
  if (numel(shape) != a->value().size()) {
    throw ShapeError("reshape: cannot reshape " + shape_str(a->shape()) + " to " +
                     shape_str(shape));
  }
  return make_op(
      "reshape", {a},
      [shape](const std::vector<Var>& p) { return p[0]->value().reshaped(shape); },
      [](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        auto g = self.grad().data();
        auto ga = p[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      });
}

Var conv3d(const Var& x, const Var& w, Conv3dOptions options) {
  const Shape& xs = x->shape();
  const bool batched = xs.size() == 5;
  if (xs.size() != 4 && !batched) {
    throw ShapeError("conv3d: input must be (C,X,Y,Z) or (B,C,X,Y,Z), got " + shape_str(xs));
  }
  const std::size_t batch = batched ? xs[0] : 1;
  const Shape sample(xs.end() - 4, xs.end());
  const auto geom = kernels::conv_geometry(sample, w->shape(), options);
  Shape out_shape{geom.filters, geom.axis[0].out, geom.axis[1].out, geom.axis[2].out};
  if (batched) out_shape.insert(out_shape.begin(), batch);
  const std::size_t in_stride = numel(sample);
  const std::size_t out_stride = geom.filters * geom.out_voxels();

  return make_op(
      "conv3d", {x, w},
      [=](const std::vector<Var>& p) {
        Tensor out(out_shape);
        std::vector<double> scratch;
        const double* xv = p[0]->value().data().data();
        const double* wv = p[1]->value().data().data();
        for (std::size_t b = 0; b < batch; ++b) {
          kernels::conv3d_forward(geom, xv + b * in_stride, wv, out.data().data() + b * out_stride,
                                  scratch);
        }
        return out;
      },
      [=](const DiffNode& self, const std::vector<Var>& p) {
        std::vector<double> scratch;
        const double* xv = p[0]->value().data().data();
        const double* wv = p[1]->value().data().data();
        const double* g = self.grad().data().data();
        double* dx = p[0]->requires_grad() ? p[0]->grad_buffer().data() : nullptr;
        double* dw = p[1]->requires_grad() ? p[1]->grad_buffer().data() : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          kernels::conv3d_backward(geom, xv + b * in_stride, wv, g + b * out_stride, dw,
                                   dx ? dx + b * in_stride : nullptr, scratch);
        }
      });
}

Var maxpool3d(const Var& x, std::array<std::size_t, 3> window) {
  const Shape& xs = x->shape();
  if (xs.size() != 4 && xs.size() != 5) {
    throw ShapeError("maxpool3d: input must be (C,X,Y,Z) or (B,C,X,Y,Z), got " + shape_str(xs));
  }
  const std::size_t lead = xs.size() == 5 ? xs[0] * xs[1] : xs[0];
  const std::array<std::size_t, 3> in{xs[xs.size() - 3], xs[xs.size() - 2], xs[xs.size() - 1]};
  std::array<std::size_t, 3> out{};
  for (int a = 0; a < 3; ++a) {
    if (window[a] == 0 || window[a] > in[a]) {
      throw ShapeError("maxpool3d: window " + std::to_string(window[a]) + " exceeds extent " +
                       std::to_string(in[a]) + " of input " + shape_str(xs));
    }
    out[a] = in[a] / window[a];
  }
  Shape out_shape = xs;
  for (int a = 0; a < 3; ++a) out_shape[xs.size() - 3 + a] = out[a];
  auto argmax = std::make_shared<std::vector<std::size_t>>();

  return make_op(
      "maxpool3d", {x},
      [=](const std::vector<Var>& p) {
        Tensor result(out_shape);
        auto y = result.data();
        auto v = p[0]->value().data();
        argmax->assign(y.size(), 0);
        const std::size_t in_vox = in[0] * in[1] * in[2];
        std::size_t o = 0;
        for (std::size_t c = 0; c < lead; ++c) {
          const std::size_t base = c * in_vox;
          for (std::size_t a = 0; a < out[0]; ++a)
            for (std::size_t b = 0; b < out[1]; ++b)
              for (std::size_t d = 0; d < out[2]; ++d, ++o) {
                std::size_t best = 0;
                double best_v = 0.0;
                bool first = true;
                for (std::size_t i = 0; i < window[0]; ++i)
                  for (std::size_t j = 0; j < window[1]; ++j)
                    for (std::size_t l = 0; l < window[2]; ++l) {
                      const std::size_t idx = base + ((a * window[0] + i) * in[1] +
                                                      (b * window[1] + j)) * in[2] +
                                              d * window[2] + l;
                      if (first || v[idx] > best_v) {
                        best_v = v[idx];
                        best = idx;
                        first = false;
                      }
                    }
                y[o] = best_v;
                (*argmax)[o] = best;
              }
        }
        return result;
      },
      [argmax](const DiffNode& self, const std::vector<Var>& p) {
        if (!p[0]->requires_grad()) return;
        auto g = self.grad().data();
        auto ga = p[0]->grad_buffer();
        for (std::size_t o = 0; o < g.size(); ++o) ga[(*argmax)[o]] += g[o];
      });
}

}  // namespace ad

}  // namespace voxbayes
