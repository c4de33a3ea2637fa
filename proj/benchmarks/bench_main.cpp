// Copyright 2026 The voxbayes Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cmath>

#include "voxbayes/autodiff.hpp"
#include "voxbayes/bayes.hpp"
#include "voxbayes/calibration.hpp"
#include "voxbayes/flow.hpp"
#include "voxbayes/network.hpp"
#include "voxbayes/shap.hpp"
#include "voxbayes/synth.hpp"

using namespace voxbayes;

namespace {

// Conv forward+backward on a (1, C, 32, 32, 16) volume with F 3x3x3 filters.
void BM_Conv3dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto f = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  auto x = parameter(rng.normal_tensor({1, c, 32, 32, 16}));
  auto w = parameter(rng.normal_tensor({f, c, 3, 3, 3}));
  for (auto _ : state) {
    auto y = ad::sum(ad::conv3d(x, w, {1, ad::Padding::same}));
    benchmark::DoNotOptimize(backward(y));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(32 * 32 * 16 * c * f * 27));
}
BENCHMARK(BM_Conv3dForwardBackward)->Args({1, 16})->Args({16, 16})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_FlowForward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto flow = make_flow(dim, rng, {.steps = 2, .hidden = 16, .input_scale = 0.1, .output_scale = 0.1});
  const auto z = constant(rng.normal_tensor({1, dim}));
  for (auto _ : state) benchmark::DoNotOptimize(flow_forward(z, flow).log_det->value());
}
BENCHMARK(BM_FlowForward)->Arg(16)->Arg(128)->Arg(256);

void BM_MnfDenseForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto params = make_mnf_params({n, n}, n, rng);
  const auto x = constant(rng.normal_tensor({8, n}));
  for (auto _ : state) {
    KlLedger ledger;
    benchmark::DoNotOptimize(mnf_dense_forward(x, params, rng, ledger, "d")->value());
  }
}
BENCHMARK(BM_MnfDenseForward)->Arg(64)->Arg(256);

void BM_ReferenceForward(benchmark::State& state) {
  const auto variant = static_cast<BayesVariant>(state.range(0));
  Model model(build_reference_model({32, 32, 16}, variant, Head::sigmoid, {.filters = 16, .dense_units = 32}), 4);
  SynthConfig c;
  c.n = 4;
  const auto data = make_blob_dataset(c);
  std::vector<const Volume*> vols;
  for (const auto& s : data) vols.push_back(&s.volume);
  const auto input = constant(stack_volumes(vols));
  Rng rng(5);
  for (auto _ : state) {
    KlLedger ledger;
    benchmark::DoNotOptimize(model.forward(input, ForwardMode::sample, rng, &ledger)->value());
  }
  state.SetLabel(to_string(variant));
}
BENCHMARK(BM_ReferenceForward)
    ->Arg(static_cast<int>(BayesVariant::none))
    ->Arg(static_cast<int>(BayesVariant::flipout))
    ->Arg(static_cast<int>(BayesVariant::mnf))
    ->Unit(benchmark::kMillisecond);

Volume bench_volume(std::size_t extent) {
  Rng rng(6);
  Volume v;
  v.voxels = rng.normal_tensor({extent, extent, extent});
  return v;
}

double linear_model(const Volume& v) {
  double s = 0.0;
  for (double x : v.voxels.data()) s += x;
  return 1.0 / (1.0 + std::exp(-s * 1e-3));
}

void BM_ExactShapley(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  const auto vol = bench_volume(16);
  const auto part = partition_volume(vol.voxels.shape(), {g, g, 2});
  for (auto _ : state) benchmark::DoNotOptimize(exact_shapley(linear_model, vol, part, zeros_like(vol)));
  state.SetLabel(std::to_string(part.size()) + " patches");
}
BENCHMARK(BM_ExactShapley)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_SampledShapley(benchmark::State& state) {
  const auto vol = bench_volume(16);
  const auto part = partition_volume(vol.voxels.shape(), {4, 4, 2});
  for (auto _ : state)
    benchmark::DoNotOptimize(sampled_shapley(linear_model, vol, part, zeros_like(vol), state.range(0), 7));
}
BENCHMARK(BM_SampledShapley)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_CalibrationReport(benchmark::State& state) {
  Rng rng(8);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> p(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = rng.uniform();
    y[i] = rng.bernoulli(p[i]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(calibration_report(p, y, 0.5, 10));
}
BENCHMARK(BM_CalibrationReport)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
