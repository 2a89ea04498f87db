// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "spil/local_spil.hpp"
#include "spil/network.hpp"
#include "spil/sampling.hpp"
#include "spil/training.hpp"

namespace spil {
namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::from({r, c}, std::move(v));
}

std::vector<Vec3> random_points(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), std::floor(8.0 * u(rng))};
  return pts;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_FarthestPointSample(benchmark::State& state) {
  Rng rng(2);
  const auto pts = random_points(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(farthest_point_sample(pts, pts.size() / 4));
}
BENCHMARK(BM_FarthestPointSample)->Arg(256)->Arg(2048);

void BM_LocalSpilForward(benchmark::State& state) {
  const auto variant = static_cast<PositionVariant>(state.range(0));
  Rng rng(3);
  LocalSpilConfig cfg;
  cfg.in_dim = 2;
  cfg.embed_dim = 16;
  cfg.head_out_dim = 8;
  cfg.num_heads = 4;
  cfg.variant = variant;
  cfg.pos_hidden = 8;
  const auto weights = LocalSpilWeights::init(cfg, rng);
  const auto pts = random_points(256, rng);
  const Tensor feats = random_matrix(256, 2, rng);
  const auto groups = ball_query_group(pts, {}, 0, farthest_point_sample(pts, 32), 4.0, 16);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(local_spil_forward(groups, feats, weights, cfg));
  state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_LocalSpilForward)->DenseRange(0, 2);

void BM_DeskTrainEpoch(benchmark::State& state) {
  std::vector<SkeletonPointCloud> data;
  for (const auto& s : generate_synthetic(16, 1)) data.push_back(build_point_cloud(s));
  Network net = Network::build(NetworkConfig::desk(), 7);
  TrainConfig tc;
  tc.epochs = 1;
  for (auto _ : state) {
    tc.seed += 1;
    benchmark::DoNotOptimize(train(net, data, tc));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_DeskTrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace spil
BENCHMARK_MAIN();
