// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// The stacked network: per stage FPS -> ball query -> Local-SPIL -> Global-SPIL,
// then global average pooling, dropout and a linear classifier.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "spil/global_spil.hpp"
#include "spil/local_spil.hpp"
#include "spil/optim.hpp"
#include "spil/pose.hpp"
#include "spil/random.hpp"
#include "spil/sampling.hpp"

namespace spil {

enum class InitialFeatures { Confidence, Parts, Both };

std::string_view to_string(InitialFeatures f);
InitialFeatures parse_initial_features(std::string_view name);

struct StageConfig {
  std::size_t n_centroids = 512;
  std::size_t k_neighbors = 32;
  double radius_factor = 0.8;
  bool use_global = true;
  LocalSpilConfig local;
  GlobalSpilConfig global;
};

struct NetworkConfig {
  std::size_t input_points = 2048;
  double t_frame = 5.0;
  std::vector<StageConfig> stages;
  std::size_t classifier_hidden = 256;  // 0 = pooled features feed the classifier directly
  double dropout_rate = 0.4;
  std::size_t num_classes = 2;
  InitialFeatures initial_features = InitialFeatures::Both;

  /// Three stages, 512/128/32 centroids, K = 32, 8 heads, widths 128/256/1024.
  static NetworkConfig defaults();
  /// One stage sized for CPU training on 256-point clouds.
  static NetworkConfig desk();
  /// One stage on 16 points; small enough for exhaustive gradient checks.
  static NetworkConfig micro();

  std::size_t input_dim() const;
  std::size_t pooled_dim() const;
  double radius(std::size_t stage) const { return stages.at(stage).radius_factor * t_frame; }

  /// Re-derives stage input widths and global dims/point counts from the
  /// stage sizes, e.g. after changing head counts.
  void rechain();
  /// Throws ConfigError naming the offending stage.
  void validate() const;
};

/// Fixed-size network input: coordinates plus an M x feature_dim feature matrix.
struct PointSetInput {
  std::vector<Vec3> coords;
  std::vector<double> features;
  std::size_t feature_dim = 0;
};

/// Resamples a cloud to cfg.input_points (with replacement when short, a
/// random subset when long; original point order is kept) and selects the
/// configured initial features.
PointSetInput prepare_input(const SkeletonPointCloud& cloud, const NetworkConfig& cfg, Rng& rng);

struct ForwardOptions {
  bool training = false;   // random FPS start and active dropout
  std::uint64_t seed = 0;  // drives both when training
};

struct StageTrace {
  SampledCentroids centroids;
  std::vector<Neighborhood> neighborhoods;
  LocalTrace local;
};

struct ForwardTrace {
  std::vector<StageTrace> stages;
};

class Network {
 public:
  static Network build(const NetworkConfig& cfg, std::uint64_t seed);

  const NetworkConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Copy whose parameters share storage with this network but accumulate
  /// gradients separately.
  Network replica() const;

  /// 1 x D pooled representation after the last stage.
  Tensor pooled_features(const PointSetInput& input, const ForwardOptions& opts, ForwardTrace* trace = nullptr) const;
  /// 1 x num_classes logits.
  Tensor forward(const PointSetInput& input, const ForwardOptions& opts, ForwardTrace* trace = nullptr) const;

 private:
  struct Stage {
    LocalSpilWeights local;
    GlobalSpilWeights global;
  };

  template <class F>
  void visit(F&& f) {
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      const std::string prefix = "block" + std::to_string(s);
      stages_[s].local.visit(prefix + ".local", f);
      if (cfg_.stages[s].use_global) stages_[s].global.visit(prefix + ".global", f);
    }
    if (cfg_.classifier_hidden > 0) hidden_.visit("classifier.hidden", f);
    classifier_.visit("classifier.out", f);
  }
  void register_parameters();

  NetworkConfig cfg_;
  std::vector<Stage> stages_;
  Linear hidden_;
  Linear classifier_;
  ParameterSet params_;
};

inline constexpr double kProbabilityClamp = 1e-7;
/// Init gain of the final classifier layer relative to Kaiming-uniform.
inline constexpr double kClassifierGain = 0.05;

/// Binary cross-entropy on p = softmax(logits)[1], clamped to [1e-7, 1 - 1e-7].
Tensor bce_loss(const Tensor& logits, int label);
/// Same loss given the class-1 probability directly.
Tensor bce_from_probability(const Tensor& p, int label);

}  // namespace spil
