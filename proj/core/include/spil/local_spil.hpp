// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Local skeleton-points interaction layer.
//
// Inside each neighborhood of K points, every head builds a K x K interaction
// matrix W from a feature relation R^F and a non-negative position relation
// R^L:
//
//   W_ij = R^L_ij exp(R^F_ij) / sum_j R^L_ij exp(R^F_ij)
//   R^F_ij = relu(phi(g(f_i))) . relu(theta(g(f_j)))
//
// R^L is one of three variants:
//   Spacing   -ln(sigmoid(|p_i - p_j|))
//   Spanning  relu(psi(M1(p_i) - M2(p_j))) / (|p_i - p_j| + eps)
//   Masking   0 for same-frame pairs farther apart than d in (x, y),
//             relu(psi(M1(p_i) || M2(p_j))) otherwise
//
// Each head then updates the neighborhood as relu(W X M_head); heads are
// concatenated along features and max-pooled over the K points.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spil/nn.hpp"
#include "spil/pose.hpp"
#include "spil/sampling.hpp"
#include "spil/tensor.hpp"

namespace spil {

enum class PositionVariant { Spacing, Spanning, Masking };

std::string_view to_string(PositionVariant v);
PositionVariant parse_position_variant(std::string_view name);

inline constexpr double kSpanningEpsilon = 1e-6;
inline constexpr double kFallbackThreshold = 1e-12;

struct LocalSpilConfig {
  std::size_t in_dim = 2;
  std::size_t embed_dim = 64;
  std::size_t head_out_dim = 16;
  std::size_t num_heads = 8;
  PositionVariant variant = PositionVariant::Masking;
  double mask_d = 0.04;
  std::size_t pos_hidden = 16;  // width of the M1/M2 position perceptrons
  std::size_t pos_layers = 0;    // 0 = default depth, 3->h->h for both M1 and M2

  std::size_t out_dim() const { return num_heads * head_out_dim; }
  std::size_t position_layers() const;
  void validate() const;
};

struct LocalHeadWeights {
  Linear phi;
  Linear theta;
  Tensor m;    // embed_dim x head_out_dim
  Mlp m1;      // empty for Spacing
  Mlp m2;
  Linear psi;  // pos_hidden -> 1 (Spanning) or 2*pos_hidden -> 1 (Masking)

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    phi.visit(prefix + ".phi", f);
    theta.visit(prefix + ".theta", f);
    f(prefix + ".M", m);
    if (!m1.layers.empty()) {
      m1.visit(prefix + ".M1", f);
      m2.visit(prefix + ".M2", f);
      psi.visit(prefix + ".psi", f);
    }
  }
};

struct LocalSpilWeights {
  Linear g;
  std::vector<LocalHeadWeights> heads;

  static LocalSpilWeights init(const LocalSpilConfig& cfg, Rng& rng);

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    g.visit(prefix + ".g", f);
    for (std::size_t h = 0; h < heads.size(); ++h) heads[h].visit(prefix + ".head" + std::to_string(h), f);
  }
};

/// Per-neighborhood record of the head-averaged interaction matrix.
struct LocalTrace {
  std::vector<std::vector<double>> mean_weights;  // K x K row-major, one per neighborhood
  std::vector<std::size_t> fallback_rows;         // rows that took the uniform fallback, summed over heads
};

/// relu(phi(fi)) relu(theta(fj))^T for row blocks fi (a x C') and fj (b x C'); a x b.
Tensor feature_relation(const Tensor& fi, const Tensor& fj, const LocalHeadWeights& head);

double position_spacing(const Vec3& pi, const Vec3& pj);
Tensor position_spanning(const Vec3& pi, const Vec3& pj, const LocalHeadWeights& head);
Tensor position_masking(const Vec3& pi, const Vec3& pj, double d, const LocalHeadWeights& head);

/// Same-frame test used by Masking: |z_i - z_j| < 0.5 and planar distance > d.
bool masked_pair(const Vec3& pi, const Vec3& pj, double d);

/// R^L for every (row, col) pair under the configured variant.
Tensor position_relation(std::span<const Vec3> rows, std::span<const Vec3> cols, const LocalHeadWeights& head,
                         const LocalSpilConfig& cfg);

/// Row-normalizes R^L exp(R^F). Rows whose denominator falls below 1e-12 become
/// uniform 1/K. Row indices that fell back are appended to `fallback_rows`.
Tensor normalize_interaction(const Tensor& rl, const Tensor& rf, std::vector<std::size_t>* fallback_rows = nullptr);

/// W for one neighborhood; `embedded` holds the g-embedded member features (K x C').
Tensor interaction_weights(const Neighborhood& neigh, const Tensor& embedded, const LocalHeadWeights& head,
                           const LocalSpilConfig& cfg);

/// relu(W X M).
Tensor head_update(const Tensor& w, const Tensor& x, const Tensor& m);

/// Per-centroid features (N x num_heads*head_out_dim). Member features are
/// gathered from `point_features` (M x in_dim) by member index.
Tensor local_spil_forward(const std::vector<Neighborhood>& neighborhoods, const Tensor& point_features,
                          const LocalSpilWeights& weights, const LocalSpilConfig& cfg, LocalTrace* trace = nullptr);

/// Same, reading member features stored in the neighborhoods.
Tensor local_spil_forward(const std::vector<Neighborhood>& neighborhoods, const LocalSpilWeights& weights,
                          const LocalSpilConfig& cfg, LocalTrace* trace = nullptr);

}  // namespace spil
