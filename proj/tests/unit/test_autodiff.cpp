// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "support.hpp"
#include "voxbayes/errors.hpp"

using namespace voxbayes;
using voxbayes::testing::max_leaf_error;
using voxbayes::testing::uniform_tensor;
using voxbayes::testing::weighted_sum;

TEST_CASE("forward evaluates simple graphs") {
  CHECK(ad::add(constant(2.0), constant(3.0))->value().item() == 5.0);

  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(ad::matmul(constant(eye), constant(m))->value() == m);

  CHECK(ad::sigmoid(constant(0.0))->value().item() == 0.5);
}

TEST_CASE("shape mismatch names the primitive and both shapes") {
  auto a = constant(Tensor({2}));
  auto b = constant(Tensor({3}));
  try {
    ad::add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::matmul(constant(Tensor({2, 3})), constant(Tensor({2, 3}))), ShapeError);
}

TEST_CASE("backward on closed-form examples") {
  auto x = parameter(Tensor::scalar(3.0));
  auto g = backward(ad::square(x));
  CHECK(g.at(x.get()).item() == doctest::Approx(6.0));

  auto v = parameter(Tensor({4}, 0.0));
  auto gv = backward(ad::sum(ad::sigmoid(v)));
  for (double d : gv.at(v.get()).data()) CHECK(d == doctest::Approx(0.25));
}

TEST_CASE("backward contract errors") {
  auto x = parameter(Tensor({3}, 1.0));
  CHECK_THROWS_AS(backward(ad::exp(x)), GraphError);

  auto root = ad::sum(ad::exp(x));
  backward(root);
  CHECK_THROWS_AS(backward(root), GraphError);
  reset(root);
  CHECK_NOTHROW(backward(root));
}

TEST_CASE("gradient of a constant is exactly zero") {
  auto c = constant(Tensor::vector({1.0, -2.0, 0.5}));
  auto x = parameter(Tensor::vector({0.3, 0.1, -0.7}));
  auto root = ad::sum(ad::mul(ad::exp(c), x));
  auto g = backward(root);
  CHECK(g.find(c.get()) == g.end());
  for (double d : c->grad().data()) CHECK(d == 0.0);
}

TEST_CASE("two-layer dense net BCE matches finite differences") {
  Rng rng(11);
  auto x = constant(rng.normal_tensor({5, 4}));
  auto w1 = parameter(rng.normal_tensor({4, 6}));
  auto w2 = parameter(rng.normal_tensor({6, 1}));
  const Tensor y = Tensor({5, 1}, std::vector<double>{1, 0, 1, 1, 0});
  auto h = ad::tanh(ad::matmul(x, w1));
  auto p = ad::sigmoid(ad::matmul(h, w2));
  auto yv = constant(y);
  auto one = constant(Tensor({5, 1}, 1.0));
  auto ll = ad::add(ad::mul(yv, ad::log(p)), ad::mul(ad::sub(one, yv), ad::log(ad::sub(one, p))));
  auto bce = ad::neg(ad::mean(ll));
  CHECK(max_leaf_error(bce, {w1, w2}) < 1e-4);
}

TEST_CASE("finite_difference_gradient examples") {
  const Tensor x3 = Tensor::scalar(3.0);
  CHECK(std::abs(finite_difference_gradient([](const Tensor& t) { return t.item() * t.item(); }, x3)
                     .item() - 6.0) < 1e-6);

  Rng rng(2);
  const Tensor x = rng.normal_tensor({7});
  const Tensor ones = finite_difference_gradient(
      [](const Tensor& t) {
        double s = 0;
        for (double v : t.data()) s += v;
        return s;
      },
      x);
  for (double d : ones.data()) CHECK(d == doctest::Approx(1.0).epsilon(1e-9));

  const Tensor e = finite_difference_gradient([](const Tensor& t) { return std::exp(t.item()); },
                                              Tensor::scalar(0.0));
  CHECK(std::abs(e.item() - 1.0) < 1e-9);

  CHECK_THROWS_AS(finite_difference_gradient([](const Tensor& t) { return std::log(t.item()); },
                                             Tensor::scalar(0.0)),
                  NumericalError);
  CHECK_THROWS_AS(finite_difference_gradient([](const Tensor&) { return 0.0; }, x3, 0.0), ConfigError);
}

namespace {

struct Primitive {
  const char* name;
  std::function<Var(Rng&, std::vector<Var>&)> build;
};

Var leaf(std::vector<Var>& leaves, Tensor t) {
  leaves.push_back(parameter(std::move(t)));
  return leaves.back();
}

const std::vector<Primitive>& primitives() {
  static const std::vector<Primitive> list{
      {"add", [](Rng& r, std::vector<Var>& l) {
         return ad::add(leaf(l, r.normal_tensor({3, 2})), leaf(l, r.normal_tensor({3, 2})));
       }},
      {"mul", [](Rng& r, std::vector<Var>& l) {
         return ad::mul(leaf(l, r.normal_tensor({4})), leaf(l, r.normal_tensor({4})));
       }},
      {"matmul", [](Rng& r, std::vector<Var>& l) {
         return ad::matmul(leaf(l, r.normal_tensor({3, 4})), leaf(l, r.normal_tensor({4, 2})));
       }},
      {"conv3d", [](Rng& r, std::vector<Var>& l) {
         const bool same = r.bernoulli(0.5);
         return ad::conv3d(leaf(l, r.normal_tensor({2, 2, 4, 3, 3})), leaf(l, r.normal_tensor({2, 2, 2, 3, 2})),
                           {1, same ? ad::Padding::same : ad::Padding::valid});
       }},
      {"maxpool3d", [](Rng& r, std::vector<Var>& l) {
         return ad::maxpool3d(leaf(l, r.normal_tensor({2, 4, 4, 2})), {2, 2, 2});
       }},
      {"sigmoid", [](Rng& r, std::vector<Var>& l) { return ad::sigmoid(leaf(l, r.normal_tensor({5}))); }},
      {"relu", [](Rng& r, std::vector<Var>& l) {
         // keep probes away from the kink
         Tensor t = r.normal_tensor({6});
         for (auto& v : t.data()) v += v >= 0 ? 0.05 : -0.05;
         return ad::relu(leaf(l, t));
       }},
      {"softplus", [](Rng& r, std::vector<Var>& l) {
         return ad::softplus(leaf(l, uniform_tensor(r, {5}, -4, 4)));
       }},
      {"log", [](Rng& r, std::vector<Var>& l) { return ad::log(leaf(l, uniform_tensor(r, {5}, 0.2, 3))); }},
      {"exp", [](Rng& r, std::vector<Var>& l) { return ad::exp(leaf(l, uniform_tensor(r, {5}, -2, 2))); }},
      {"sum", [](Rng& r, std::vector<Var>& l) { return ad::sum(leaf(l, r.normal_tensor({2, 3}))); }},
      {"mean", [](Rng& r, std::vector<Var>& l) { return ad::mean(leaf(l, r.normal_tensor({2, 3}))); }},
      {"broadcast", [](Rng& r, std::vector<Var>& l) {
         return ad::broadcast_to(leaf(l, r.normal_tensor({1, 3})), {4, 3});
       }},
  };
  return list;
}

}  // namespace

TEST_CASE("every primitive matches finite differences at 100 random points") {
  for (const auto& prim : primitives()) {
    SUBCASE(prim.name) {
      double worst = 0.0;
      for (std::uint64_t i = 0; i < 100; ++i) {
        Rng rng = Rng(404).derive(i);
        std::vector<Var> leaves;
        Var y = prim.build(rng, leaves);
        Var root = y->value().size() == 1 ? ad::reshape(y, {}) : weighted_sum(y, rng);
        worst = std::max(worst, max_leaf_error(root, leaves));
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("forward is referentially transparent") {
  Rng rng(5);
  auto x = parameter(rng.normal_tensor({1, 5, 5, 3}));
  auto w = parameter(rng.normal_tensor({3, 1, 3, 3, 3}));
  auto root = ad::sum(ad::softplus(ad::conv3d(x, w, {1, ad::Padding::same})));
  const Tensor a = forward(root);
  const Tensor b = forward(root);
  CHECK(a == b);
}

TEST_CASE("softplus is stable for large inputs") {
  auto y = ad::softplus(constant(Tensor::vector({40.0, 1000.0, -1000.0})));
  CHECK(y->value()[0] == 40.0);
  CHECK(y->value()[1] == 1000.0);
  CHECK(y->value()[2] >= 0.0);
  CHECK(y->value().all_finite());
}

TEST_CASE("set_num_threads rejects zero") {
  CHECK_THROWS_AS(kernels::set_num_threads(0), ConfigError);
  CHECK_NOTHROW(kernels::set_num_threads(1));
}
