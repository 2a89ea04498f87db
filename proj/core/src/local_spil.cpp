// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/local_spil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spil/error.hpp"

namespace spil {

namespace {

double distance(const Vec3& a, const Vec3& b) { return std::sqrt(squared_distance(a, b)); }

// psi applied to the two position embeddings, split into a per-row and a
// per-column term: s is (rows x 1), t is (cols x 1). psi is affine, so
// psi(a - b) = a.w - b.w + c and psi(a || b) = a.w1 + b.w2 + c.
struct PositionTerms {
  Tensor s;
  Tensor t;
};

PositionTerms position_terms(const Tensor& row_coords, const Tensor& col_coords, const LocalHeadWeights& head,
                             PositionVariant variant) {
  const Tensor a = head.m1(row_coords);
  const Tensor b = head.m2(col_coords);
  if (variant == PositionVariant::Spanning) {
    return {matmul(a, head.psi.weight), matmul(b, head.psi.weight)};
  }
  const std::size_t h = head.m1.out_dim();
  const Tensor w1 = slice_rows(head.psi.weight, 0, h);
  const Tensor w2 = slice_rows(head.psi.weight, h, h);
  return {matmul(a, w1), matmul(b, w2)};
}

Tensor combine_position(const PositionTerms& terms, std::span<const Vec3> rows, std::span<const Vec3> cols,
                        const LocalHeadWeights& head, const LocalSpilConfig& cfg) {
  const Shape square{rows.size(), cols.size()};
  std::vector<double> factor(rows.size() * cols.size());
  Tensor pre;
  const Tensor s = broadcast(terms.s, square);
  const Tensor t = broadcast(transpose(terms.t), square);
  const Tensor c = broadcast(head.psi.bias, square);
  if (cfg.variant == PositionVariant::Spanning) {
    pre = add(sub(s, t), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        factor[i * cols.size() + j] = 1.0 / (distance(rows[i], cols[j]) + kSpanningEpsilon);
      }
    }
  } else {
    pre = add(add(s, t), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        factor[i * cols.size() + j] = masked_pair(rows[i], cols[j], cfg.mask_d) ? 0.0 : 1.0;
      }
    }
  }
  return mul(relu(pre), Tensor::from(square, std::move(factor)));
}

Tensor spacing_matrix(std::span<const Vec3> rows, std::span<const Vec3> cols) {
  std::vector<double> out(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out[i * cols.size() + j] = position_spacing(rows[i], cols[j]);
  }
  return Tensor::from({rows.size(), cols.size()}, std::move(out));
}

void require_variant(const LocalHeadWeights& head, PositionVariant variant) {
  if (head.m1.layers.empty()) {
    throw ConfigError(std::string("head has no position networks for variant ") + std::string(to_string(variant)));
  }
}

Tensor forward_impl(const std::vector<Neighborhood>& neighborhoods, const Tensor& gathered,
                    const LocalSpilWeights& weights, const LocalSpilConfig& cfg, LocalTrace* trace) {
  if (neighborhoods.empty()) throw ValidationError("local_spil_forward: no neighborhoods");
  if (weights.heads.size() != cfg.num_heads) throw ConfigError("local_spil_forward: head count does not match config");
  const std::size_t k = neighborhoods.front().size();
  const std::size_t n = neighborhoods.size();
  std::vector<Vec3> coords;
  coords.reserve(n * k);
  for (const auto& nb : neighborhoods) {
    if (nb.size() != k) throw ValidationError("local_spil_forward: neighborhoods must share the same K");
    coords.insert(coords.end(), nb.member_coords.begin(), nb.member_coords.end());
  }

  const Tensor embedded = weights.g(gathered);

  struct HeadCache {
    Tensor phi;
    Tensor theta;
    PositionTerms pos;
  };
  std::vector<HeadCache> cache;
  const Tensor coord_t = cfg.variant == PositionVariant::Spacing ? Tensor() : coords_tensor(coords);
  for (const auto& head : weights.heads) {
    HeadCache hc{relu(head.phi(embedded)), relu(head.theta(embedded)), {}};
    if (cfg.variant != PositionVariant::Spacing) {
      require_variant(head, cfg.variant);
      hc.pos = position_terms(coord_t, coord_t, head, cfg.variant);
    }
    cache.push_back(std::move(hc));
  }

  if (trace) {
    trace->mean_weights.assign(n, std::vector<double>(k * k, 0.0));
    trace->fallback_rows.assign(n, 0);
  }

  std::vector<Tensor> pooled;
  pooled.reserve(n);
  std::vector<Tensor> head_out(cfg.num_heads);
  for (std::size_t c = 0; c < n; ++c) {
    const std::span<const Vec3> pts(coords.data() + c * k, k);
    const Tensor x = slice_rows(embedded, c * k, k);
    const Tensor spacing = cfg.variant == PositionVariant::Spacing ? spacing_matrix(pts, pts) : Tensor();
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      const HeadCache& hc = cache[h];
      const Tensor rf = matmul(slice_rows(hc.phi, c * k, k), transpose(slice_rows(hc.theta, c * k, k)));
      Tensor rl;
      if (cfg.variant == PositionVariant::Spacing) {
        rl = spacing;
      } else {
        const PositionTerms terms{slice_rows(hc.pos.s, c * k, k), slice_rows(hc.pos.t, c * k, k)};
        rl = combine_position(terms, pts, pts, weights.heads[h], cfg);
      }
      std::vector<std::size_t> fallback;
      const Tensor w = normalize_interaction(rl, rf, trace ? &fallback : nullptr);
      if (trace) {
        auto& acc = trace->mean_weights[c];
        const auto wv = w.data();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += wv[i] / static_cast<double>(cfg.num_heads);
        trace->fallback_rows[c] += fallback.size();
      }
      head_out[h] = head_update(w, x, weights.heads[h].m);
    }
    const Tensor fused = cfg.num_heads == 1 ? head_out[0] : concat(head_out, 1);
    pooled.push_back(reduce_max(fused, 0));
  }
  return pooled.size() == 1 ? pooled.front() : concat(pooled, 0);
}

}  // namespace

std::string_view to_string(PositionVariant v) {
  switch (v) {
    case PositionVariant::Spacing:
      return "spacing";
    case PositionVariant::Spanning:
      return "spanning";
    case PositionVariant::Masking:
      return "masking";
  }
  return "masking";
}

PositionVariant parse_position_variant(std::string_view name) {
  if (name == "spacing") return PositionVariant::Spacing;
  if (name == "spanning") return PositionVariant::Spanning;
  if (name == "masking") return PositionVariant::Masking;
  throw ConfigError("unknown position variant '" + std::string(name) + "' (expected spacing|spanning|masking)");
}

void LocalSpilConfig::validate() const {
  if (in_dim == 0 || embed_dim == 0 || head_out_dim == 0 || num_heads == 0) {
    throw ConfigError("local layer widths and head count must be positive");
  }
  if (variant == PositionVariant::Masking && !(mask_d > 0.0)) throw ConfigError("mask threshold d must be positive");
  if (variant != PositionVariant::Spacing && pos_hidden == 0) {
    throw ConfigError("position networks need a positive width");
  }
}

std::size_t LocalSpilConfig::position_layers() const {
  return pos_layers > 0 ? pos_layers : 2;
}

LocalSpilWeights LocalSpilWeights::init(const LocalSpilConfig& cfg, Rng& rng) {
  cfg.validate();
  LocalSpilWeights w;
  w.g = Linear::kaiming(cfg.in_dim, cfg.embed_dim, rng);
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    LocalHeadWeights head;
    head.phi = Linear::kaiming(cfg.embed_dim, cfg.embed_dim, rng);
    head.theta = Linear::kaiming(cfg.embed_dim, cfg.embed_dim, rng);
    head.m = Linear::kaiming(cfg.embed_dim, cfg.head_out_dim, rng).weight;
    if (cfg.variant != PositionVariant::Spacing) {
      std::vector<std::size_t> widths(cfg.position_layers() + 1, cfg.pos_hidden);
      widths.front() = 3;
      head.m1 = Mlp::kaiming(widths, rng);
      head.m2 = Mlp::kaiming(widths, rng);
      const std::size_t psi_in = cfg.variant == PositionVariant::Masking ? 2 * cfg.pos_hidden : cfg.pos_hidden;
      head.psi = Linear::kaiming(psi_in, 1, rng);
    }
    w.heads.push_back(std::move(head));
  }
  return w;
}

Tensor feature_relation(const Tensor& fi, const Tensor& fj, const LocalHeadWeights& head) {
  return matmul(relu(head.phi(fi)), transpose(relu(head.theta(fj))));
}

double position_spacing(const Vec3& pi, const Vec3& pj) {
  // -ln(sigmoid(D)) = ln(1 + e^-D), written to stay accurate for large D.
  return std::log1p(std::exp(-distance(pi, pj)));
}

bool masked_pair(const Vec3& pi, const Vec3& pj, double d) {
  if (std::abs(pi[2] - pj[2]) >= 0.5) return false;
  const double dx = pi[0] - pj[0], dy = pi[1] - pj[1];
  return std::sqrt(dx * dx + dy * dy) > d;
}

Tensor position_relation(std::span<const Vec3> rows, std::span<const Vec3> cols, const LocalHeadWeights& head,
                         const LocalSpilConfig& cfg) {
  if (cfg.variant == PositionVariant::Spacing) return spacing_matrix(rows, cols);
  require_variant(head, cfg.variant);
  const std::vector<Vec3> r(rows.begin(), rows.end());
  const std::vector<Vec3> c(cols.begin(), cols.end());
  const PositionTerms terms = position_terms(coords_tensor(r), coords_tensor(c), head, cfg.variant);
  return combine_position(terms, rows, cols, head, cfg);
}

Tensor position_spanning(const Vec3& pi, const Vec3& pj, const LocalHeadWeights& head) {
  LocalSpilConfig cfg;
  cfg.variant = PositionVariant::Spanning;
  return position_relation(std::span(&pi, 1), std::span(&pj, 1), head, cfg);
}

Tensor position_masking(const Vec3& pi, const Vec3& pj, double d, const LocalHeadWeights& head) {
  LocalSpilConfig cfg;
  cfg.variant = PositionVariant::Masking;
  cfg.mask_d = d;
  return position_relation(std::span(&pi, 1), std::span(&pj, 1), head, cfg);
}

Tensor normalize_interaction(const Tensor& rl, const Tensor& rf, std::vector<std::size_t>* fallback_rows) {
  if (rl.shape() != rf.shape() || rl.rank() != 2) {
    throw ShapeError("normalize_interaction: shape mismatch " + shape_to_string(rl.shape()) + " vs " +
                     shape_to_string(rf.shape()));
  }
  const std::size_t rows = rl.dim(0), cols = rl.dim(1);
  const Shape square = rl.shape();

  // Shift each R^F row by its maximum; the shift cancels in the ratio.
  std::vector<double> shift(rows * cols);
  std::vector<double> row_shift(rows);
  const auto rfv = rf.data();
  for (std::size_t i = 0; i < rows; ++i) {
    row_shift[i] = *std::max_element(rfv.begin() + static_cast<std::ptrdiff_t>(i * cols),
                                     rfv.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
    std::fill_n(shift.begin() + static_cast<std::ptrdiff_t>(i * cols), cols, -row_shift[i]);
  }
  Tensor numer = mul(rl, exp(add(rf, Tensor::from(square, std::move(shift)))));

  const auto nv = numer.data();
  std::vector<double> keep(rows * cols, 1.0);
  std::vector<double> fill(rows * cols, 0.0);
  bool any_fallback = false;
  for (std::size_t i = 0; i < rows; ++i) {
    const double total = std::accumulate(nv.begin() + static_cast<std::ptrdiff_t>(i * cols),
                                         nv.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols), 0.0);
    // Unshifted denominator is total * exp(row_shift).
    const bool degenerate = !(total > 0.0) || std::log(total) + row_shift[i] < std::log(kFallbackThreshold);
    if (degenerate) {
      any_fallback = true;
      std::fill_n(keep.begin() + static_cast<std::ptrdiff_t>(i * cols), cols, 0.0);
      std::fill_n(fill.begin() + static_cast<std::ptrdiff_t>(i * cols), cols, 1.0);
      if (fallback_rows) fallback_rows->push_back(i);
    }
  }
  if (any_fallback) {
    numer = add(mul(numer, Tensor::from(square, std::move(keep))), Tensor::from(square, std::move(fill)));
  }
  return div(numer, broadcast(reduce_sum(numer, 1), square));
}

Tensor interaction_weights(const Neighborhood& neigh, const Tensor& embedded, const LocalHeadWeights& head,
                           const LocalSpilConfig& cfg) {
  const Tensor rf = feature_relation(embedded, embedded, head);
  const Tensor rl = position_relation(neigh.member_coords, neigh.member_coords, head, cfg);
  return normalize_interaction(rl, rf);
}

Tensor head_update(const Tensor& w, const Tensor& x, const Tensor& m) { return relu(matmul(matmul(w, x), m)); }

Tensor local_spil_forward(const std::vector<Neighborhood>& neighborhoods, const Tensor& point_features,
                          const LocalSpilWeights& weights, const LocalSpilConfig& cfg, LocalTrace* trace) {
  std::vector<std::size_t> members;
  for (const auto& nb : neighborhoods) members.insert(members.end(), nb.member_indices.begin(), nb.member_indices.end());
  if (members.empty()) throw ValidationError("local_spil_forward: no neighborhoods");
  return forward_impl(neighborhoods, gather_rows(point_features, members), weights, cfg, trace);
}

Tensor local_spil_forward(const std::vector<Neighborhood>& neighborhoods, const LocalSpilWeights& weights,
                          const LocalSpilConfig& cfg, LocalTrace* trace) {
  if (neighborhoods.empty()) throw ValidationError("local_spil_forward: no neighborhoods");
  std::vector<double> flat;
  std::size_t rows = 0;
  for (const auto& nb : neighborhoods) {
    if (nb.feature_dim != cfg.in_dim) throw ShapeError("local_spil_forward: neighborhood feature width != in_dim");
    flat.insert(flat.end(), nb.member_features.begin(), nb.member_features.end());
    rows += nb.size();
  }
  return forward_impl(neighborhoods, Tensor::from({rows, cfg.in_dim}, std::move(flat)), weights, cfg, trace);
}

}  // namespace spil
