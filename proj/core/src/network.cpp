// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/network.hpp"

#include <algorithm>

#include "spil/error.hpp"

namespace spil {

std::string_view to_string(InitialFeatures f) {
  switch (f) {
    case InitialFeatures::Confidence:
      return "confidence";
    case InitialFeatures::Parts:
      return "parts";
    case InitialFeatures::Both:
      return "both";
  }
  return "both";
}

InitialFeatures parse_initial_features(std::string_view name) {
  if (name == "confidence") return InitialFeatures::Confidence;
  if (name == "parts") return InitialFeatures::Parts;
  if (name == "both") return InitialFeatures::Both;
  throw ConfigError("unknown initial features '" + std::string(name) + "' (expected confidence|parts|both)");
}

namespace {

StageConfig make_stage(std::size_t centroids, std::size_t k, double r, std::size_t embed, std::size_t heads,
                       std::size_t head_out, std::size_t pos_hidden) {
  StageConfig s;
  s.n_centroids = centroids;
  s.k_neighbors = k;
  s.radius_factor = r;
  s.local.embed_dim = embed;
  s.local.num_heads = heads;
  s.local.head_out_dim = head_out;
  s.local.pos_hidden = pos_hidden;
  return s;
}

}  // namespace

NetworkConfig NetworkConfig::defaults() {
  NetworkConfig cfg;
  cfg.stages = {make_stage(512, 32, 0.8, 64, 8, 16, 16), make_stage(128, 32, 0.6, 128, 8, 32, 16),
                make_stage(32, 32, 0.4, 256, 8, 128, 16)};
  cfg.rechain();
  return cfg;
}

NetworkConfig NetworkConfig::desk() {
  NetworkConfig cfg;
  cfg.input_points = 256;
  cfg.stages = {make_stage(32, 16, 0.8, 16, 4, 8, 8)};
  cfg.classifier_hidden = 32;
  cfg.rechain();
  return cfg;
}

NetworkConfig NetworkConfig::micro() {
  NetworkConfig cfg;
  cfg.input_points = 16;
  cfg.stages = {make_stage(4, 4, 0.8, 6, 2, 4, 4)};
  cfg.classifier_hidden = 6;
  cfg.rechain();
  return cfg;
}

std::size_t NetworkConfig::input_dim() const { return initial_features == InitialFeatures::Both ? 2 : 1; }

std::size_t NetworkConfig::pooled_dim() const {
  if (stages.empty()) throw ConfigError("network has no stages");
  return stages.back().local.out_dim();
}

void NetworkConfig::rechain() {
  for (std::size_t s = 0; s < stages.size(); ++s) {
    StageConfig& st = stages[s];
    st.local.in_dim = s == 0 ? input_dim() : stages[s - 1].local.out_dim();
    st.global.dim = st.local.out_dim();
    st.global.n_points = st.n_centroids;
  }
}

void NetworkConfig::validate() const {
  if (input_points == 0) throw ConfigError("input_points must be positive");
  if (!(t_frame > 0.0)) throw ConfigError("t_frame must be positive");
  if (stages.empty()) throw ConfigError("network needs at least one stage");
  if (num_classes != 2) throw ConfigError("only two-class output is supported");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const StageConfig& st = stages[s];
    const std::string where = "stage " + std::to_string(s) + ": ";
    if (st.n_centroids == 0 || st.k_neighbors == 0) throw ConfigError(where + "n_centroids and k_neighbors must be positive");
    if (!(st.radius_factor > 0.0)) throw ConfigError(where + "radius_factor must be positive");
    try {
      st.local.validate();
      if (st.use_global) st.global.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    const std::size_t expected_in = s == 0 ? input_dim() : stages[s - 1].local.out_dim();
    if (st.local.in_dim != expected_in) {
      throw ConfigError(where + "local in_dim " + std::to_string(st.local.in_dim) + " does not match incoming width " +
                        std::to_string(expected_in));
    }
    if (st.use_global) {
      if (st.global.dim != st.local.out_dim()) {
        throw ConfigError(where + "global dim " + std::to_string(st.global.dim) + " does not match local output width " +
                          std::to_string(st.local.out_dim()));
      }
      if (st.global.use_z && st.global.n_points != st.n_centroids) {
        throw ConfigError(where + "global n_points " + std::to_string(st.global.n_points) + " does not match n_centroids " +
                          std::to_string(st.n_centroids));
      }
    }
  }
}

PointSetInput prepare_input(const SkeletonPointCloud& cloud, const NetworkConfig& cfg, Rng& rng) {
  const std::size_t m = cloud.points.size();
  if (m == 0) throw ValidationError("cannot prepare an empty cloud");
  if (cloud.features.size() != m) throw ValidationError("cloud features do not match its points");
  const std::size_t target = cfg.input_points;

  std::vector<std::size_t> chosen;
  chosen.reserve(target);
  if (m >= target) {
    chosen.resize(m);
    for (std::size_t i = 0; i < m; ++i) chosen[i] = i;
    if (m > target) {
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(target);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) chosen.push_back(i);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    while (chosen.size() < target) chosen.push_back(pick(rng));
  }
  std::sort(chosen.begin(), chosen.end());

  PointSetInput in;
  in.feature_dim = cfg.input_dim();
  in.coords.reserve(target);
  in.features.reserve(target * in.feature_dim);
  for (std::size_t idx : chosen) {
    in.coords.push_back(cloud.points[idx]);
    const PointFeature& f = cloud.features[idx];
    switch (cfg.initial_features) {
      case InitialFeatures::Confidence:
        in.features.push_back(f[0]);
        break;
      case InitialFeatures::Parts:
        in.features.push_back(f[1]);
        break;
      case InitialFeatures::Both:
        in.features.push_back(f[0]);
        in.features.push_back(f[1]);
        break;
    }
  }
  return in;
}

Network Network::build(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Network net;
  net.cfg_ = cfg;
  Rng rng(seed);
  for (const StageConfig& st : cfg.stages) {
    Stage stage;
    stage.local = LocalSpilWeights::init(st.local, rng);
    if (st.use_global) stage.global = GlobalSpilWeights::init(st.global, rng);
    net.stages_.push_back(std::move(stage));
  }
  const std::size_t pooled = cfg.pooled_dim();
  std::size_t head_in = pooled;
  if (cfg.classifier_hidden > 0) {
    net.hidden_ = Linear::kaiming(pooled, cfg.classifier_hidden, rng);
    head_in = cfg.classifier_hidden;
  }
  // A small output layer keeps the untrained softmax near 1/2 for every input.
  net.classifier_ = Linear::kaiming(head_in, cfg.num_classes, rng, kClassifierGain);
  net.register_parameters();
  return net;
}

void Network::register_parameters() {
  params_ = ParameterSet();
  visit([this](const std::string& name, Tensor& t) { params_.add(name, t); });
}

Network Network::replica() const {
  Network copy = *this;
  copy.visit([](const std::string&, Tensor& t) { t = t.shadow(); });
  copy.register_parameters();
  return copy;
}

Tensor Network::pooled_features(const PointSetInput& input, const ForwardOptions& opts, ForwardTrace* trace) const {
  if (input.coords.empty()) throw ValidationError("forward: empty input");
  if (input.feature_dim != cfg_.input_dim() || input.features.size() != input.coords.size() * input.feature_dim) {
    throw ShapeError("forward: input features do not match the configured initial features");
  }
  std::vector<Vec3> coords = input.coords;
  Tensor features = Tensor::from({coords.size(), input.feature_dim}, input.features);
  if (trace) trace->stages.clear();

  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const StageConfig& st = cfg_.stages[s];
    const std::size_t start = opts.training ? derive_seed(opts.seed, s + 1) % coords.size() : 0;
    SampledCentroids centroids = farthest_point_sample(coords, st.n_centroids, start);
    std::vector<Neighborhood> groups = ball_query_group(coords, {}, 0, centroids, cfg_.radius(s), st.k_neighbors);

    StageTrace* st_trace = nullptr;
    if (trace) st_trace = &trace->stages.emplace_back();
    Tensor local = local_spil_forward(groups, features, stages_[s].local, st.local, st_trace ? &st_trace->local : nullptr);
    if (st.use_global) {
      features = global_attention_forward({centroids.coords, local}, stages_[s].global, st.global);
    } else {
      features = local;
    }
    coords = centroids.coords;
    if (st_trace) {
      st_trace->centroids = std::move(centroids);
      st_trace->neighborhoods = std::move(groups);
    }
  }
  return reduce_mean(features, 0);
}

Tensor Network::forward(const PointSetInput& input, const ForwardOptions& opts, ForwardTrace* trace) const {
  Tensor h = pooled_features(input, opts, trace);
  if (cfg_.classifier_hidden > 0) h = relu(hidden_(h));
  if (opts.training && cfg_.dropout_rate > 0.0) {
    Rng rng(derive_seed(opts.seed, 0xd7));
    std::bernoulli_distribution keep(1.0 - cfg_.dropout_rate);
    const double survivor = 1.0 / (1.0 - cfg_.dropout_rate);
    std::vector<double> mask(h.size());
    for (double& m : mask) m = keep(rng) ? survivor : 0.0;
    h = mul(h, Tensor::from(h.shape(), std::move(mask)));
  }
  return classifier_(h);
}

Tensor bce_from_probability(const Tensor& p, int label) {
  if (p.size() != 1) throw ShapeError("bce: expected a single probability");
  if (label != 0 && label != 1) throw ValidationError("bce: label must be 0 or 1");
  // Outside the clamp range the loss is constant in p. Stay attached through a
  // zero-slope term so a saturated sample still backpropagates (zeros).
  Tensor clamped = p;
  const double v = p.item();
  if (v < kProbabilityClamp) clamped = add(scale(p, 0.0), Tensor::full(p.shape(), kProbabilityClamp));
  if (v > 1.0 - kProbabilityClamp) clamped = add(scale(p, 0.0), Tensor::full(p.shape(), 1.0 - kProbabilityClamp));
  if (label == 1) return neg(log(clamped));
  return neg(log(sub(Tensor::full(p.shape(), 1.0), clamped)));
}

Tensor bce_loss(const Tensor& logits, int label) {
  if (logits.size() != 2) throw ShapeError("bce_loss: expected two logits, got " + shape_to_string(logits.shape()));
  const Tensor probs = softmax_lastdim(reshape(logits, {1, 2}));
  return bce_from_probability(slice_rows(transpose(probs), 1, 1), label);
}

}  // namespace spil
