// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "spil/error.hpp"
#include "spil/training.hpp"
#include "support.hpp"

namespace spil {
namespace {

using testing::values;

std::vector<SkeletonPointCloud> micro_data(std::size_t n, std::uint64_t seed) {
  std::vector<SkeletonPointCloud> out;
  for (const auto& s : generate_synthetic(n, seed)) out.push_back(build_point_cloud(s));
  return out;
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::vector<double>> snapshot(const Network& net) {
  std::vector<std::vector<double>> out;
  for (const auto* p : net.parameters().by_name()) out.push_back(values(p->tensor));
  return out;
}

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  Network net = Network::build(NetworkConfig::micro(), 1);
  const auto before = snapshot(net);
  auto cfg = quick(3);
  cfg.learning_rate = 0.0;
  const auto metrics = train(net, micro_data(8, 1), cfg);
  EXPECT_EQ(metrics.size(), 3u);
  EXPECT_EQ(snapshot(net), before);
}

TEST(Train, SameConfigGivesIdenticalRuns) {
  const auto data = micro_data(8, 2);
  Network a = Network::build(NetworkConfig::micro(), 4);
  Network b = Network::build(NetworkConfig::micro(), 4);
  const auto ma = train(a, data, quick(3));
  const auto mb = train(b, data, quick(3));
  ASSERT_EQ(ma.size(), mb.size());
  for (std::size_t e = 0; e < ma.size(); ++e) {
    EXPECT_EQ(ma[e].epoch, e + 1);
    EXPECT_EQ(ma[e].train_loss, mb[e].train_loss);
    EXPECT_EQ(ma[e].train_acc, mb[e].train_acc);
  }
  EXPECT_EQ(snapshot(a), snapshot(b));
}

TEST(Train, ThreadCountDoesNotChangeResults) {
  const auto data = micro_data(8, 5);
  Network one = Network::build(NetworkConfig::micro(), 6);
  Network three = Network::build(NetworkConfig::micro(), 6);
  auto cfg = quick(2);
  const auto m1 = train(one, data, cfg);
  cfg.threads = 3;
  const auto m3 = train(three, data, cfg);
  EXPECT_EQ(m1.back().train_loss, m3.back().train_loss);
  EXPECT_EQ(snapshot(one), snapshot(three));
}

TEST(Train, ParametersMoveAndValidationReported) {
  const auto data = micro_data(8, 7);
  const auto val = micro_data(4, 8);
  Network net = Network::build(NetworkConfig::micro(), 2);
  const auto before = snapshot(net);
  std::size_t callbacks = 0;
  TrainOptions opts;
  opts.validation = &val;
  opts.on_epoch = [&](const Metrics& m) {
    ++callbacks;
    ASSERT_TRUE(m.val_acc.has_value());
    EXPECT_GE(m.train_acc, 0.0);
    EXPECT_LE(m.train_acc, 1.0);
  };
  train(net, data, quick(2), opts);
  EXPECT_EQ(callbacks, 2u);
  EXPECT_NE(snapshot(net), before);
}

TEST(Train, RejectsBadInput) {
  Network net = Network::build(NetworkConfig::micro(), 0);
  EXPECT_THROW(train(net, {}, quick(1)), ValidationError);
  auto cfg = quick(0);
  EXPECT_THROW(train(net, micro_data(4, 0), cfg), ConfigError);
  cfg = quick(1);
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Evaluate, FlippedLabelsGiveComplement) {
  const Network net = Network::build(NetworkConfig::micro(), 8);
  auto data = micro_data(12, 9);
  const auto report = evaluate(net, data);
  for (auto& c : data) c.label = 1 - c.label;
  const auto flipped = evaluate(net, data);
  EXPECT_NEAR(report.accuracy + flipped.accuracy, 1.0, 1e-15);
  EXPECT_EQ(report.predictions, flipped.predictions);
}

TEST(Evaluate, DeterministicAndConsistent) {
  const Network net = Network::build(NetworkConfig::micro(), 8);
  const auto data = micro_data(10, 4);
  const auto a = evaluate(net, data);
  const auto b = evaluate(net, data, {0, 2});
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.probabilities, b.probabilities);
  EXPECT_EQ(a.n_samples, 10u);
  EXPECT_EQ(a.per_class_count[0] + a.per_class_count[1], 10u);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(a.predictions[i], a.probabilities[i] > 0.5 ? 1 : 0);
    correct += a.predictions[i] == data[i].label;
  }
  EXPECT_DOUBLE_EQ(a.accuracy, double(correct) / 10.0);
  EXPECT_THROW(evaluate(net, {}), ValidationError);
}

TEST(Evaluate, PerfectPredictorScoresOne) {
  // Relabel with the network's own eval-mode predictions.
  const Network net = Network::build(NetworkConfig::micro(), 12);
  auto data = micro_data(10, 6);
  const auto first = evaluate(net, data);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = first.predictions[i];
  const auto again = evaluate(net, data);
  EXPECT_EQ(again.accuracy, 1.0);
  for (int c = 0; c < 2; ++c) {
    if (again.per_class_count[c] > 0) EXPECT_EQ(again.per_class_acc[c], 1.0);
  }
}

}  // namespace
}  // namespace spil
