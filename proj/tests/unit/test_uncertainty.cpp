// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "voxbayes/errors.hpp"
#include "voxbayes/synth.hpp"
#include "voxbayes/train.hpp"
#include "voxbayes/uncertainty.hpp"

using namespace voxbayes;

namespace {

NetworkSpec tiny(BayesVariant v, double dropout) {
  return build_reference_model({8, 8, 8}, v, Head::sigmoid, {.filters = 4, .dense_units = 8, .dropout = dropout});
}

Volume tiny_volume(std::uint64_t seed) {
  SynthConfig c;
  c.n = 2;
  c.shape = {8, 8, 8};
  c.seed = seed;
  return make_blob_dataset(c)[0].volume;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("predictive_interval examples") {
  const auto flat = predictive_interval(std::vector<double>(10, 0.7));
  CHECK(flat.class1.lo == doctest::Approx(0.7));
  CHECK(flat.class1.hi == doctest::Approx(0.7));
  CHECK(flat.width() == doctest::Approx(0.0));

  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  std::reverse(grid.begin(), grid.end());
  const auto g = predictive_interval(grid, 0.95);
  CHECK(g.class1.lo == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(g.class1.hi == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(g.mean == doctest::Approx(0.5));

  const auto one = predictive_interval(std::vector<double>{0.4});
  CHECK(one.class1.lo == 0.4);
  CHECK(one.class1.hi == 0.4);

  CHECK_THROWS_AS(predictive_interval(grid, 1.0), ConfigError);
  CHECK_THROWS_AS(predictive_interval(grid, 0.0), ConfigError);
  CHECK_THROWS_AS(predictive_interval(std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(predictive_interval(std::vector<double>{1.2}), ConfigError);
}

TEST_CASE("percentile uses linear interpolation between order statistics") {
  const std::vector<double> s{1.0, 2.0, 4.0, 8.0};
  CHECK(percentile_sorted(s, 0.0) == 1.0);
  CHECK(percentile_sorted(s, 1.0) == 8.0);
  CHECK(percentile_sorted(s, 0.5) == doctest::Approx(3.0));
  CHECK(percentile_sorted(s, 0.9) == doctest::Approx(4.0 + 0.7 * 4.0));
}

TEST_CASE("class-0 interval is the complement of class 1") {
  // 41 samples: ranks 1 and 39 are the 2.5% and 97.5% points
  std::vector<double> s(41, 0.8);
  s[0] = s[1] = 0.47307159;
  s[39] = s[40] = 0.9939988;
  const auto pi = predictive_interval(s, 0.95);
  CHECK(pi.class1.lo == doctest::Approx(0.47307159).epsilon(1e-12));
  CHECK(pi.class1.hi == doctest::Approx(0.9939988).epsilon(1e-12));
  CHECK(pi.class0.lo == doctest::Approx(0.0060012).epsilon(1e-9));
  CHECK(pi.class0.hi == doctest::Approx(0.52692841).epsilon(1e-12));
  CHECK(pi.width() == doctest::Approx(0.52092721).epsilon(1e-5));
  CHECK(flag_high_uncertainty(pi) == UncertaintyFlag::flagged);
}

TEST_CASE("flag_high_uncertainty") {
  PredictiveInterval pi;
  pi.class1 = {0.5, 0.5};
  CHECK(flag_high_uncertainty(pi) == UncertaintyFlag::not_flagged);
  pi.class1 = {0.25, 0.55};
  CHECK(pi.width() == doctest::Approx(0.3));
  pi.class1 = {0.5, 0.8};
  CHECK(pi.width() == 0.30000000000000004);
  pi.class1 = {0.2, 0.5};
  CHECK(pi.width() == 0.3);
  CHECK(flag_high_uncertainty(pi, 0.3) == UncertaintyFlag::not_flagged);
  pi.class1 = {0.1, 0.6};
  CHECK(flag_high_uncertainty(pi, 0.3) == UncertaintyFlag::flagged);
  CHECK(flag_high_uncertainty(pi, 0.6) == UncertaintyFlag::not_flagged);
  CHECK(to_string(UncertaintyFlag::flagged) == "flagged");
  CHECK(to_string(UncertaintyFlag::not_flagged) == "not_flagged");
}

TEST_CASE("intervals are nested in the level and stay complementary") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(2 + rng.below(300));
    for (auto& v : s) v = rng.uniform();
    double prev_lo = 2.0, prev_hi = -1.0;
    for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
      const auto pi = predictive_interval(s, level);
      CHECK(pi.class1.lo <= prev_lo);
      CHECK(pi.class1.hi >= prev_hi);
      CHECK(0.0 <= pi.class1.lo);
      CHECK(pi.class1.lo <= pi.class1.hi);
      CHECK(pi.class1.hi <= 1.0);
      CHECK(pi.class0.lo == 1.0 - pi.class1.hi);
      CHECK(pi.class0.hi == 1.0 - pi.class1.lo);
      prev_lo = pi.class1.lo;
      prev_hi = pi.class1.hi;
    }
  }
}

TEST_CASE("mc_predictive") {
  const Volume v = tiny_volume(2);
  Model det(tiny(BayesVariant::none, 0.0), 1);
  CHECK_THROWS_AS(mc_predictive(det, v, 10, 1), ConfigError);

  Model bayes(tiny(BayesVariant::flipout, 0.0), 1);
  const auto a = mc_predictive(bayes, v, 50, 7, "x", "m");
  const auto b = mc_predictive(bayes, v, 50, 7, "x", "m");
  CHECK(a.samples == b.samples);
  CHECK(a.samples.size() == 50);
  CHECK(a.seed == 7);
  CHECK(a.id == "x");
  CHECK(a.model_id == "m");
  for (double s : a.samples) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }

  Model silent(tiny(BayesVariant::reparam, 0.0), 1);
  for (auto& [name, p] : silent.named_parameters())
    if (name.ends_with(".rho")) p->set_value(Tensor(p->shape(), -1000.0));
  const auto same = mc_predictive(silent, v, 20, 3);
  CHECK(std::all_of(same.samples.begin(), same.samples.end(), [&](double s) { return s == same.samples[0]; }));

  Model noisy(tiny(BayesVariant::flipout, 0.2), 1);
  for (auto& [name, p] : noisy.named_parameters())
    if (name.ends_with(".rho")) p->set_value(Tensor(p->shape(), inverse_softplus(0.2)));
  const auto big = mc_predictive(noisy, v, 4000, 11);
  const auto other = mc_predictive(noisy, v, 2000, 12);
  const double pooled = std::sqrt(var_of(big.samples) / 4000 + var_of(other.samples) / 2000);
  CHECK(var_of(big.samples) > 0.0);
  CHECK(std::abs(mean_of(big.samples) - mean_of(other.samples)) < 3 * pooled);
}

TEST_CASE("percentile interval covers a known probability") {
  Rng rng(17);
  std::size_t hits = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const double a = rng.uniform(1.0, 8.0), b = rng.uniform(1.0, 8.0);
    const double m = std::log(a / b), s = 0.5 + rng.uniform();
    auto draw = [&] { return 1.0 / (1.0 + std::exp(-(m + s * rng.normal()))); };
    const double truth = draw();
    std::vector<double> samples(200);
    for (auto& x : samples) x = draw();
    const auto pi = predictive_interval(samples);
    hits += pi.class1.lo <= truth && truth <= pi.class1.hi;
  }
  CHECK(static_cast<double>(hits) / 500.0 >= 0.90);
}

TEST_CASE("prediction log round trip") {
  PredictiveSamples a;
  a.id = "blob_0001";
  a.label = 1;
  a.samples = {0.1, 0.25, 0.123456789012345};
  a.seed = 42;
  a.model_id = "abc-123";
  PredictiveSamples b;
  b.id = "unlabelled";
  b.samples = {0.9};
  const auto back = parse_prediction_log(prediction_log_json({a, b}));
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == a.id);
  CHECK(back[0].label == 1);
  CHECK(back[0].samples == a.samples);
  CHECK(back[0].seed == 42);
  CHECK(back[0].model_id == "abc-123");
  CHECK_FALSE(back[1].label.has_value());
  CHECK_THROWS_AS(parse_prediction_log("{}"), FormatError);
  CHECK_THROWS_AS(parse_prediction_log("[{\"id\": \"a\", \"samples\": []}]"), FormatError);
  CHECK_THROWS_AS(parse_prediction_log("not json"), FormatError);
}
