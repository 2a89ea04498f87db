// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "spil/error.hpp"
#include "spil/random.hpp"

namespace spil {

namespace {

// Seed streams; distinct constants keep the per-sample draws independent.
constexpr std::uint64_t kShuffleStream = 0x5f;
constexpr std::uint64_t kResampleStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kForwardStream = 3;

// Runs fn(i, worker) for i in [0, n) on `workers` threads, worker w taking
// every workers-th index. The first exception is rethrown on the caller.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double class1_probability(const Tensor& logits) {
  const double a = logits.data()[0];
  const double b = logits.data()[1];
  return 1.0 / (1.0 + std::exp(a - b));
}

}  // namespace

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(augment.jitter_sigma >= 0.0) || !(augment.rotate_max >= 0.0)) {
    throw ConfigError("augmentation magnitudes must be non-negative");
  }
}

EvalReport evaluate(const Network& net, const std::vector<SkeletonPointCloud>& data, const EvalOptions& opts) {
  if (data.empty()) throw ValidationError("evaluate: empty dataset");
  EvalReport report;
  report.n_samples = data.size();
  report.predictions.assign(data.size(), 0);
  report.probabilities.assign(data.size(), 0.0);

  parallel_for(data.size(), resolve_threads(opts.threads), [&](std::size_t i, std::size_t) {
    NoGradGuard no_grad;
    Rng rng(derive_seed(opts.seed, i, kResampleStream));
    const PointSetInput input = prepare_input(data[i], net.config(), rng);
    const Tensor logits = net.forward(input, ForwardOptions{});
    report.probabilities[i] = class1_probability(logits);
    report.predictions[i] = logits.data()[1] > logits.data()[0] ? 1 : 0;
  });

  std::array<std::size_t, 2> correct{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int label = data[i].label;
    if (label != 0 && label != 1) throw ValidationError("evaluate: label must be 0 or 1");
    ++report.per_class_count[label];
    if (report.predictions[i] == label) ++correct[label];
  }
  report.accuracy = static_cast<double>(correct[0] + correct[1]) / static_cast<double>(data.size());
  for (int c = 0; c < 2; ++c) {
    report.per_class_acc[c] =
        report.per_class_count[c] == 0 ? 0.0
                                       : static_cast<double>(correct[c]) / static_cast<double>(report.per_class_count[c]);
  }
  return report;
}

std::vector<Metrics> train(Network& net, const std::vector<SkeletonPointCloud>& data, const TrainConfig& cfg,
                           const TrainOptions& opts) {
  if (data.empty()) throw ValidationError("train: empty dataset");
  cfg.validate();
  for (const auto& cloud : data) {
    if (cloud.points.empty()) throw ValidationError("train: cloud with no points");
    if (cloud.label != 0 && cloud.label != 1) throw ValidationError("train: label must be 0 or 1");
  }

  ParameterSet& params = net.parameters();
  OptimizerState state = OptimizerState::for_parameters(params, cfg.learning_rate, cfg.momentum);
  const std::size_t workers = std::min(resolve_threads(cfg.threads), cfg.batch_size);
  std::vector<Network> replicas;
  replicas.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) replicas.push_back(net.replica());

  struct SampleResult {
    double loss = 0.0;
    bool correct = false;
    std::vector<std::vector<double>> grads;
  };
  std::vector<SampleResult> slots(cfg.batch_size);

  std::vector<std::size_t> order(data.size());
  std::vector<Metrics> history;
  history.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, epoch, kShuffleStream));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);

      parallel_for(count, workers, [&](std::size_t b, std::size_t w) {
        Network& replica = replicas[w];
        const std::size_t idx = order[begin + b];
        const std::uint64_t sample_seed = derive_seed(cfg.seed, epoch + 1, idx);

        SkeletonPointCloud cloud = data[idx];
        if (cfg.augment.enabled) {
          AugmentConfig aug = cfg.augment;
          aug.seed = derive_seed(sample_seed, kAugmentStream);
          cloud = augment(cloud, aug);
        }
        Rng rng(derive_seed(sample_seed, kResampleStream));
        const PointSetInput input = prepare_input(cloud, net.config(), rng);

        replica.parameters().zero_grads();
        const Tensor logits =
            replica.forward(input, ForwardOptions{.training = true, .seed = derive_seed(sample_seed, kForwardStream)});
        const Tensor loss = bce_loss(logits, cloud.label);
        backward(loss);

        SampleResult& slot = slots[b];
        slot.loss = loss.item();
        slot.correct = (logits.data()[1] > logits.data()[0] ? 1 : 0) == cloud.label;
        auto items = replica.parameters().items();
        slot.grads.resize(items.size());
        for (std::size_t p = 0; p < items.size(); ++p) {
          auto g = items[p].tensor.grad();
          slot.grads[p].assign(g.begin(), g.end());
        }
      });

      params.zero_grads();
      auto items = params.items();
      const double inv = 1.0 / static_cast<double>(count);
      for (std::size_t b = 0; b < count; ++b) {
        loss_sum += slots[b].loss;
        if (slots[b].correct) ++correct;
        for (std::size_t p = 0; p < items.size(); ++p) {
          auto g = items[p].tensor.mutable_grad();
          const auto& src = slots[b].grads[p];
          for (std::size_t e = 0; e < g.size(); ++e) g[e] += src[e];
        }
      }
      for (auto& item : items) {
        for (double& g : item.tensor.mutable_grad()) g *= inv;
      }
      sgd_momentum_step(params, state);
    }

    Metrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_sum / static_cast<double>(data.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(data.size());
    if (opts.validation != nullptr && !opts.validation->empty()) {
      m.val_acc = evaluate(net, *opts.validation, EvalOptions{.seed = cfg.seed, .threads = cfg.threads}).accuracy;
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.push_back(m);
    if (opts.on_epoch) opts.on_epoch(m);
  }
  return history;
}

}  // namespace spil
