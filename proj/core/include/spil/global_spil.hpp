// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Global self-attention over the sampled centroids of one stage:
//
//   a_ij = theta(x_i) . gamma(x_j) / sqrt(D) + Z_ij
//   u_i  = sum_j softmax_j(a_i)_j (delta(x_j) + eta(p_i - p_j))
//   y_i  = out(u_i + x_i) + x_i
//
// Z, the position term and the residual each have a switch.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "spil/nn.hpp"
#include "spil/pose.hpp"
#include "spil/tensor.hpp"

namespace spil {

struct GlobalSpilConfig {
  std::size_t dim = 128;
  std::size_t n_points = 512;
  bool use_z = true;
  bool use_position = true;
  bool use_residual = true;

  void validate() const;
};

struct GlobalSpilWeights {
  Linear theta;
  Linear gamma;
  Linear delta;
  Tensor z;  // n_points x n_points, zero-initialized; undefined when use_z is off
  Mlp eta;   // 3 -> D -> D; empty when use_position is off
  Mlp out;   // D -> D -> D

  static GlobalSpilWeights init(const GlobalSpilConfig& cfg, Rng& rng);

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    theta.visit(prefix + ".theta", f);
    gamma.visit(prefix + ".gamma", f);
    delta.visit(prefix + ".delta", f);
    if (z.defined()) f(prefix + ".Z", z);
    if (!eta.layers.empty()) eta.visit(prefix + ".eta", f);
    out.visit(prefix + ".out", f);
  }
};

struct StagePointSet {
  std::vector<Vec3> coords;  // N x 3
  Tensor features;           // N x D
};

/// xi[i][j] = eta(p_i - p_j), shape N x N x D.
Tensor pairwise_position_encoding(std::span<const Vec3> coords, const Mlp& eta);

/// N x D refined features. When `attention` is non-null it receives the N x N
/// attention rows.
Tensor global_attention_forward(const StagePointSet& points, const GlobalSpilWeights& w, const GlobalSpilConfig& cfg,
                                Tensor* attention = nullptr);

}  // namespace spil
