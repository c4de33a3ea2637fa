// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "voxbayes/errors.hpp"
#include "voxbayes/flow.hpp"

using namespace voxbayes;

namespace {

FlowStack random_flow(std::size_t dim, std::uint64_t seed, std::size_t steps = 2) {
  Rng rng(seed);
  return make_flow(dim, rng, {.steps = steps, .hidden = 16, .input_scale = 0.5, .output_scale = 0.5});
}

double std_normal_logpdf(const Tensor& z) {
  double s = 0.0;
  for (double v : z.data()) s += -0.5 * v * v - 0.5 * std::log(2.0 * std::numbers::pi);
  return s;
}

// One coupling step whose nets ignore their input: s = tanh(a), t = b on coordinate 2.
FlowStack constant_step(double a, double b) {
  Rng rng(0);
  FlowStack flow = make_flow(2, rng, {.steps = 1, .hidden = 3, .input_scale = 0.0, .output_scale = 0.0});
  flow.steps[0].scale_b2->set_value(Tensor::vector({0.0, a}));
  flow.steps[0].shift_b2->set_value(Tensor::vector({0.0, b}));
  return flow;
}

}  // namespace

TEST_CASE("masks alternate and flip each step") {
  Rng rng(1);
  const auto flow = make_flow(5, rng);
  REQUIRE(flow.steps.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    double ones = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(flow.steps[k].mask[i] == ((i + k) % 2 == 0 ? 1.0 : 0.0));
      ones += flow.steps[k].mask[i];
    }
    CHECK(ones >= 1.0);
    CHECK(ones <= 4.0);
  }
  CHECK_THROWS_AS(make_flow(0, rng), ConfigError);
}

TEST_CASE("zero output weights give the identity") {
  Rng rng(2);
  const auto flow = make_flow(4, rng);
  const Tensor z = rng.normal_tensor({3, 4});
  const auto fwd = flow_forward(constant(z), flow);
  CHECK(fwd.z->value() == z);
  for (double d : fwd.log_det->value().data()) CHECK(d == 0.0);
  const auto inv = flow_inverse(constant(z), flow);
  CHECK(inv.z->value() == z);
  for (double d : inv.log_det->value().data()) CHECK(d == 0.0);
}

TEST_CASE("single coupling step by hand") {
  const double a = 0.7, b = -0.4, s = std::tanh(a);
  const auto flow = constant_step(a, b);
  const auto fwd = flow_forward(constant(Tensor::vector({1.5, 2.0})), flow);
  CHECK(fwd.z->value()[0] == 1.5);
  CHECK(fwd.z->value()[1] == doctest::Approx(2.0 * std::exp(s) + b).epsilon(1e-14));
  CHECK(fwd.log_det->value()[0] == doctest::Approx(s).epsilon(1e-14));

  const auto inv = flow_inverse(constant(Tensor::vector({1.5, 3.0})), flow);
  CHECK(inv.z->value()[1] == doctest::Approx((3.0 - b) * std::exp(-s)).epsilon(1e-14));
  CHECK(inv.log_det->value()[0] == doctest::Approx(-s).epsilon(1e-14));
}

TEST_CASE("round trip and log-det antisymmetry on random flows") {
  double worst_z = 0.0, worst_ld = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng = Rng(900).derive(i);
    const std::size_t dim = 1 + rng.below(6);
    const auto flow = random_flow(dim, 1000 + i);
    const Tensor z = rng.normal_tensor({4, dim});
    const auto fwd = flow_forward(constant(z), flow);
    const auto back = flow_inverse(fwd.z, flow);
    worst_z = std::max(worst_z, max_abs_diff(back.z->value(), z));
    for (std::size_t r = 0; r < 4; ++r)
      worst_ld = std::max(worst_ld, std::abs(fwd.log_det->value()[r] + back.log_det->value()[r]));
  }
  CHECK(worst_z < 1e-10);
  CHECK(worst_ld < 1e-10);
}

TEST_CASE("log density of the identity flow is the standard normal") {
  Rng rng(3);
  const auto flow = make_flow(2, rng);
  CHECK(flow_log_density(constant(Tensor::vector({0.0, 0.0})), flow)->value()[0] ==
        doctest::Approx(-1.8378770664093453).epsilon(1e-12));
  const Tensor z = rng.normal_tensor({1, 2});
  CHECK(flow_log_density(constant(z), flow)->value()[0] == doctest::Approx(std_normal_logpdf(z)).epsilon(1e-12));
}

TEST_CASE("dim-1 density integrates to one") {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    const auto flow = random_flow(1, seed, 3);
    const std::size_t n = 24001;
    const double lo = -12.0, hi = 12.0, h = (hi - lo) / (n - 1);
    Tensor grid({n, 1});
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo + h * i;
    const Tensor logp = flow_log_density(constant(grid), flow)->value();
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i) integral += (i == 0 || i + 1 == n ? 0.5 : 1.0) * std::exp(logp[i]);
    integral *= h;
    CHECK(std::abs(integral - 1.0) < 1e-3);
  }
}

TEST_CASE("flow_log_density gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto flow = random_flow(3, 50 + seed);
    Rng rng(seed);
    auto z = parameter(rng.normal_tensor({2, 3}));
    auto root = ad::sum(flow_log_density(z, flow));
    auto leaves = flow.parameters();
    leaves.push_back(z);
    CHECK(voxbayes::testing::max_leaf_error(root, leaves) < 1e-4);
  }
}

TEST_CASE("dimension mismatch is a ShapeError") {
  const auto flow = random_flow(3, 1);
  CHECK_THROWS_AS(flow_forward(constant(Tensor({4})), flow), ShapeError);
  CHECK_THROWS_AS(flow_inverse(constant(Tensor({2, 2})), flow), ShapeError);
  CHECK_THROWS_AS(flow_log_density(constant(Tensor({1, 5})), flow), ShapeError);
}

TEST_CASE("log-scales stay bounded") {
  const auto flow = constant_step(50.0, 0.0);
  const auto fwd = flow_forward(constant(Tensor::vector({0.0, 1.0})), flow);
  CHECK(fwd.log_det->value()[0] <= 1.0);
}

TEST_CASE("named parameters cover every step") {
  const auto flow = random_flow(2, 3);
  const auto named = flow.named_parameters("f");
  CHECK(named.size() == flow.parameters().size());
  CHECK(named.size() == 16);
}
