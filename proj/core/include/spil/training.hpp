// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "spil/network.hpp"
#include "spil/pose.hpp"

namespace spil {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  std::size_t threads = 1;  // 0 = hardware concurrency

  void validate() const;
};

struct Metrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-sample loss over the epoch, train mode
  double train_acc = 0.0;   // running accuracy over the epoch, train mode
  std::optional<double> val_acc;
  double wall_seconds = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t n_samples = 0;
  std::array<double, 2> per_class_acc{};
  std::array<std::size_t, 2> per_class_count{};
  std::vector<int> predictions;
  std::vector<double> probabilities;  // softmax class-1 probability per sample
};

struct EvalOptions {
  std::uint64_t seed = 0;   // drives resampling to input_points
  std::size_t threads = 1;  // 0 = hardware concurrency
};

/// Eval mode: no augmentation, no dropout, FPS starts at index 0.
EvalReport evaluate(const Network& net, const std::vector<SkeletonPointCloud>& data, const EvalOptions& opts = {});

struct TrainOptions {
  const std::vector<SkeletonPointCloud>* validation = nullptr;
  std::function<void(const Metrics&)> on_epoch;
};

/// Trains `net` in place. Each batch is processed sample-parallel on parameter
/// replicas; per-sample gradients are summed in sample order so results do not
/// depend on the thread count.
std::vector<Metrics> train(Network& net, const std::vector<SkeletonPointCloud>& data, const TrainConfig& cfg,
                           const TrainOptions& opts = {});

std::size_t resolve_threads(std::size_t requested);

}  // namespace spil
