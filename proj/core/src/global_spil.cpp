// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/global_spil.hpp"

#include <cmath>

#include "spil/error.hpp"

namespace spil {

void GlobalSpilConfig::validate() const {
  if (dim == 0) throw ConfigError("global layer width must be positive");
  if (use_z && n_points == 0) throw ConfigError("global layer with Z needs a fixed positive point count");
}

GlobalSpilWeights GlobalSpilWeights::init(const GlobalSpilConfig& cfg, Rng& rng) {
  cfg.validate();
  GlobalSpilWeights w;
  w.theta = Linear::kaiming(cfg.dim, cfg.dim, rng);
  w.gamma = Linear::kaiming(cfg.dim, cfg.dim, rng);
  w.delta = Linear::kaiming(cfg.dim, cfg.dim, rng);
  if (cfg.use_z) w.z = Tensor::zeros({cfg.n_points, cfg.n_points}, true);
  if (cfg.use_position) w.eta = Mlp::kaiming({3, cfg.dim, cfg.dim}, rng);
  w.out = Mlp::kaiming({cfg.dim, cfg.dim, cfg.dim}, rng);
  return w;
}

Tensor pairwise_position_encoding(std::span<const Vec3> coords, const Mlp& eta) {
  const std::size_t n = coords.size();
  if (n == 0) throw ValidationError("pairwise_position_encoding: no points");
  std::vector<Tensor> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> diff;
    diff.reserve(n * 3);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t a = 0; a < 3; ++a) diff.push_back(coords[i][a] - coords[j][a]);
    }
    rows.push_back(eta(Tensor::from({n, 3}, std::move(diff))));
  }
  return reshape(concat(rows, 0), {n, n, eta.out_dim()});
}

Tensor global_attention_forward(const StagePointSet& points, const GlobalSpilWeights& w, const GlobalSpilConfig& cfg,
                                Tensor* attention) {
  const Tensor& x = points.features;
  const std::size_t n = points.coords.size();
  if (x.rank() != 2 || x.dim(0) != n || x.dim(1) != cfg.dim) {
    throw ShapeError("global_attention_forward: features " + shape_to_string(x.shape()) + " do not match " +
                     std::to_string(n) + " points of width " + std::to_string(cfg.dim));
  }
  if (cfg.use_z) {
    if (n != cfg.n_points) {
      throw ShapeError("global_attention_forward: Z expects " + std::to_string(cfg.n_points) + " points, got " +
                       std::to_string(n));
    }
    if (!w.z.defined() || w.z.shape() != Shape{n, n}) throw ConfigError("global_attention_forward: Z missing or misshapen");
  }

  Tensor scores = scale(matmul(w.theta(x), transpose(w.gamma(x))), 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  if (cfg.use_z) scores = add(scores, w.z);
  const Tensor alpha = softmax_lastdim(scores);
  if (attention) *attention = alpha;

  Tensor u = matmul(alpha, w.delta(x));
  if (cfg.use_position) {
    if (w.eta.layers.size() != 2) throw ConfigError("global_attention_forward: eta must have two layers");
    // eta's second layer is affine and each attention row sums to one, so it
    // commutes with the weighted sum: sum_j a_ij eta(p_i - p_j) = L2(sum_j a_ij h_ij)
    // with h_ij = relu(W1 (p_i - p_j) + b1) = relu(q_i - q_j + b1), q = P W1.
    const Linear& first = w.eta.layers[0];
    const Linear& second = w.eta.layers[1];
    const Tensor q = matmul(coords_tensor(points.coords), first.weight);
    const Shape block = q.shape();
    const Tensor bias = broadcast(first.bias, block);
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor hidden = relu(add(sub(broadcast(slice_rows(q, i, 1), block), q), bias));
      rows.push_back(matmul(slice_rows(alpha, i, 1), hidden));
    }
    u = add(u, second(n == 1 ? rows.front() : concat(rows, 0)));
  }
  if (cfg.use_residual) return add(w.out(add(u, x)), x);
  return w.out(u);
}

}  // namespace spil
