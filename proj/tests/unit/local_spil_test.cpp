// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spil/error.hpp"
#include "spil/gradcheck.hpp"
#include "spil/local_spil.hpp"
#include "spil/optim.hpp"
#include "support.hpp"

namespace spil {
namespace {

using testing::values;

// --- plain-loop oracle ---

std::vector<double> run(const Linear& l, const std::vector<double>& x) {
  const auto w = l.weight.data();
  const auto b = l.bias.data();
  const std::size_t in = l.in_dim(), out = l.out_dim();
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) y[o] += x[i] * w[i * out + o];
  }
  return y;
}

std::vector<double> relu_v(std::vector<double> v) {
  for (double& x : v) x = std::max(0.0, x);
  return v;
}

std::vector<double> run(const Mlp& m, std::vector<double> x) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    x = run(m.layers[i], x);
    if (i + 1 < m.layers.size()) x = relu_v(x);
  }
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

double oracle_rl(const Vec3& pi, const Vec3& pj, const LocalHeadWeights& head, const LocalSpilConfig& cfg) {
  const double d = dist(pi, pj);
  if (cfg.variant == PositionVariant::Spacing) return -std::log(1.0 / (1.0 + std::exp(-d)));
  const auto a = run(head.m1, {pi[0], pi[1], pi[2]});
  const auto b = run(head.m2, {pj[0], pj[1], pj[2]});
  if (cfg.variant == PositionVariant::Spanning) {
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return std::max(0.0, run(head.psi, diff)[0]) / (d + kSpanningEpsilon);
  }
  const bool same_frame = pi[2] == pj[2];
  if (same_frame && std::hypot(pi[0] - pj[0], pi[1] - pj[1]) > cfg.mask_d) return 0.0;
  std::vector<double> cat = a;
  cat.insert(cat.end(), b.begin(), b.end());
  return std::max(0.0, run(head.psi, cat)[0]);
}

// Head-averaged K x K interaction matrix, straight from the definitions.
std::vector<double> oracle_weights(const Neighborhood& nb, const LocalSpilWeights& w, const LocalSpilConfig& cfg) {
  const std::size_t k = nb.size();
  std::vector<std::vector<double>> emb(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> f(nb.member_features.begin() + i * cfg.in_dim,
                          nb.member_features.begin() + (i + 1) * cfg.in_dim);
    emb[i] = run(w.g, f);
  }
  std::vector<double> mean(k * k, 0.0);
  for (const auto& head : w.heads) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto phi = relu_v(run(head.phi, emb[i]));
      std::vector<double> row(k);
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const auto theta = relu_v(run(head.theta, emb[j]));
        row[j] = oracle_rl(nb.member_coords[i], nb.member_coords[j], head, cfg) * std::exp(dot(phi, theta));
        total += row[j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        const double wij = total < kFallbackThreshold ? 1.0 / double(k) : row[j] / total;
        mean[i * k + j] += wij / double(w.heads.size());
      }
    }
  }
  return mean;
}

// --- random fixtures ---

LocalSpilConfig small_config(PositionVariant v, std::size_t heads = 2) {
  LocalSpilConfig cfg;
  cfg.in_dim = 2;
  cfg.embed_dim = 5;
  cfg.head_out_dim = 3;
  cfg.num_heads = heads;
  cfg.variant = v;
  cfg.mask_d = 0.3;
  cfg.pos_hidden = 4;
  return cfg;
}

std::vector<Neighborhood> random_neighborhoods(Rng& rng, std::size_t m, std::size_t n, std::size_t k,
                                               double radius = 0.6, std::size_t frames = 3) {
  const auto pts = testing::random_points(m, rng, frames);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> feats(m * 2);
  for (double& f : feats) f = u(rng);
  return ball_query_group(pts, feats, 2, farthest_point_sample(pts, n), radius, k);
}

constexpr PositionVariant kVariants[] = {PositionVariant::Spacing, PositionVariant::Spanning,
                                         PositionVariant::Masking};

// --- building blocks ---

TEST(FeatureRelation, IdentityInitDotProduct) {
  LocalHeadWeights head;
  head.phi = Linear::identity(2);
  head.theta = Linear::identity(2);
  const Tensor ones = Tensor::from({1, 2}, {1, 1});
  EXPECT_DOUBLE_EQ(feature_relation(ones, ones, head).item(), 2.0);
  EXPECT_DOUBLE_EQ(feature_relation(Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {0, 1}), head).item(), 0.0);
}

TEST(Spacing, KnownValues) {
  EXPECT_NEAR(position_spacing({0.3, 0.3, 1}, {0.3, 0.3, 1}), std::log(2.0), 1e-15);
  EXPECT_NEAR(position_spacing({0, 0, 0}, {1, 0, 0}), 0.313261687518223, 1e-12);
  const double far = position_spacing({0, 0, 0}, {50, 0, 0});
  EXPECT_GT(far, 0.0);
  EXPECT_LT(far, 1e-20);
}

TEST(Spacing, StrictlyDecreasingInDistance) {
  double prev = position_spacing({0, 0, 0}, {0, 0, 0});
  for (int i = 1; i <= 200; ++i) {
    const double cur = position_spacing({0, 0, 0}, {0.05 * i, 0, 0});
    EXPECT_LT(cur, prev);
    EXPECT_GT(cur, 0.0);
    prev = cur;
  }
}

LocalHeadWeights constant_position_head(std::size_t in_psi, double psi_weight, double psi_bias = 0.0) {
  LocalHeadWeights head;
  head.m1.layers = {Linear::constant(3, 1, 1.0)};
  head.m2.layers = {Linear::constant(3, 1, 1.0)};
  head.psi = Linear::constant(in_psi, 1, psi_weight, psi_bias);
  return head;
}

TEST(Spanning, CoincidentPointsGiveZero) {
  const auto head = constant_position_head(1, 1.0);
  EXPECT_DOUBLE_EQ(position_spanning({0.2, 0.4, 1}, {0.2, 0.4, 1}, head).item(), 0.0);
}

TEST(Spanning, AllOnesUnitDistance) {
  const auto head = constant_position_head(1, 1.0);
  EXPECT_NEAR(position_spanning({1, 1, 1}, {0, 1, 1}, head).item(), 1.0 / (1.0 + kSpanningEpsilon), 1e-15);
}

TEST(Spanning, NegativePreActivationClampsToZero) {
  const auto head = constant_position_head(1, 1.0);
  // M1(pi) - M2(pj) = 1 - 3 < 0.
  EXPECT_DOUBLE_EQ(position_spanning({1, 0, 0}, {1, 1, 1}, head).item(), 0.0);
}

TEST(Masking, SameFrameBeyondThresholdIsZero) {
  const auto head = constant_position_head(2, 1.0, 0.1);
  EXPECT_DOUBLE_EQ(position_masking({0.1, 0.1, 2}, {0.2, 0.1, 2}, 0.04, head).item(), 0.0);
  EXPECT_TRUE(masked_pair({0.1, 0.1, 2}, {0.2, 0.1, 2}, 0.04));
}

TEST(Masking, OtherFramesAlwaysComputed) {
  const auto head = constant_position_head(2, 1.0, 0.1);
  const Vec3 a{0.1, 0.1, 2}, b{0.9, 0.9, 3};
  EXPECT_FALSE(masked_pair(a, b, 0.04));
  // psi(0.2+0.1+2, 0.9+0.9+3) + 0.1
  EXPECT_NEAR(position_masking(a, b, 0.04, head).item(), 2.2 + 4.8 + 0.1, 1e-12);
}

TEST(Masking, SameFrameWithinThresholdComputed) {
  const auto head = constant_position_head(2, 1.0, 0.1);
  EXPECT_GT(position_masking({0.1, 0.1, 2}, {0.12, 0.1, 2}, 0.04, head).item(), 0.0);
}

TEST(Interaction, KnownNormalizations) {
  auto w = values(normalize_interaction(Tensor::from({1, 2}, {1, 1}), Tensor::from({1, 2}, {0, 0})));
  EXPECT_NEAR(w[0], 0.5, 1e-15);
  EXPECT_NEAR(w[1], 0.5, 1e-15);
  w = values(normalize_interaction(Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {-3.0, 7.5})));
  EXPECT_EQ(w, (std::vector<double>{1.0, 0.0}));
  w = values(normalize_interaction(Tensor::from({1, 2}, {1, 1}), Tensor::from({1, 2}, {std::log(3.0), 0})));
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
}

TEST(Interaction, LargeFeatureRelationStaysFinite) {
  const auto w = values(normalize_interaction(Tensor::from({1, 3}, {1, 1, 1}), Tensor::from({1, 3}, {800, 799, 0})));
  EXPECT_NEAR(w[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
}

TEST(Interaction, ZeroRowFallsBackToUniform) {
  std::vector<std::size_t> fallback;
  const auto w = values(normalize_interaction(Tensor::from({2, 2}, {0, 0, 1, 3}), Tensor::zeros({2, 2}), &fallback));
  EXPECT_EQ(w, (std::vector<double>{0.5, 0.5, 0.25, 0.75}));
  EXPECT_EQ(fallback, (std::vector<std::size_t>{0}));
}

TEST(HeadUpdate, IdentityIsRelu) {
  const Tensor x = Tensor::from({2, 2}, {1, -2, -3, 4});
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(values(head_update(eye, x, eye)), (std::vector<double>{1, 0, 0, 4}));
}

TEST(HeadUpdate, UniformWeightsGiveIdenticalRows) {
  Rng rng(2);
  const Tensor x = testing::random_tensor({4, 3}, rng);
  const Tensor m = testing::random_tensor({3, 2}, rng);
  const Tensor out = head_update(Tensor::full({4, 4}, 0.25), x, m);
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(out.at(r, c), out.at(0, c), 1e-15);
  }
}

// --- whole layer ---

TEST(LocalSpil, OutputShape) {
  Rng rng(1);
  LocalSpilConfig cfg;
  cfg.in_dim = 2;
  cfg.embed_dim = 64;
  cfg.head_out_dim = 16;
  cfg.num_heads = 8;
  const auto weights = LocalSpilWeights::init(cfg, rng);
  const auto nbs = random_neighborhoods(rng, 80, 3, 32);
  EXPECT_EQ(local_spil_forward(nbs, weights, cfg).shape(), (Shape{3, 128}));
}

TEST(LocalSpil, MatchesLoopOracle) {
  for (PositionVariant v : kVariants) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      Rng rng(seed);
      const auto cfg = small_config(v, 1 + seed % 3);
      const auto weights = LocalSpilWeights::init(cfg, rng);
      const auto nbs = random_neighborhoods(rng, 30, 4, 6);
      LocalTrace trace;
      local_spil_forward(nbs, weights, cfg, &trace);
      for (std::size_t c = 0; c < nbs.size(); ++c) {
        const auto expected = oracle_weights(nbs[c], weights, cfg);
        for (std::size_t i = 0; i < expected.size(); ++i) {
          ASSERT_NEAR(trace.mean_weights[c][i], expected[i], 1e-9) << to_string(v) << " seed " << seed;
        }
      }
    }
  }
}

TEST(LocalSpil, RowsAreDistributions) {
  for (PositionVariant v : kVariants) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(seed * 7 + 1);
      const auto cfg = small_config(v);
      const auto weights = LocalSpilWeights::init(cfg, rng);
      const std::size_t k = 2 + seed % 7;
      const auto nbs = random_neighborhoods(rng, 25, 5, k);
      for (const auto& nb : nbs) {
        const Tensor emb = weights.g(Tensor::from({k, 2}, nb.member_features));
        for (const auto& head : weights.heads) {
          const Tensor w = interaction_weights(nb, emb, head, cfg);
          for (std::size_t i = 0; i < k; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
              ASSERT_GE(w.at(i, j), 0.0);
              sum += w.at(i, j);
              if (v == PositionVariant::Masking && masked_pair(nb.member_coords[i], nb.member_coords[j], cfg.mask_d)) {
                // Masked unless the whole row took the uniform fallback.
                const Tensor rl = position_relation(nb.member_coords, nb.member_coords, head, cfg);
                double row_total = 0.0;
                for (std::size_t q = 0; q < k; ++q) row_total += rl.at(i, q);
                if (row_total > 0.0) ASSERT_EQ(w.at(i, j), 0.0);
              }
            }
            ASSERT_NEAR(sum, 1.0, 1e-9);
          }
        }
      }
    }
  }
}

TEST(LocalSpil, InvariantToNeighbourSlotOrder) {
  for (PositionVariant v : kVariants) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed + 100);
      const auto cfg = small_config(v);
      const auto weights = LocalSpilWeights::init(cfg, rng);
      auto nbs = random_neighborhoods(rng, 30, 3, 6, 2.0);
      const auto before = values(local_spil_forward(nbs, weights, cfg));

      for (auto& nb : nbs) {
        std::vector<std::size_t> perm(nb.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin() + 1, perm.end(), rng);
        Neighborhood p = nb;
        for (std::size_t s = 0; s < perm.size(); ++s) {
          p.member_indices[s] = nb.member_indices[perm[s]];
          p.member_coords[s] = nb.member_coords[perm[s]];
          for (std::size_t f = 0; f < 2; ++f) p.member_features[s * 2 + f] = nb.member_features[perm[s] * 2 + f];
        }
        nb = p;
      }
      const auto after = values(local_spil_forward(nbs, weights, cfg));
      ASSERT_EQ(before.size(), after.size());
      for (std::size_t i = 0; i < before.size(); ++i) ASSERT_NEAR(before[i], after[i], 1e-9) << to_string(v);
    }
  }
}

TEST(LocalSpil, SingleHeadPath) {
  Rng rng(3);
  const auto cfg = small_config(PositionVariant::Masking, 1);
  const auto weights = LocalSpilWeights::init(cfg, rng);
  const auto nbs = random_neighborhoods(rng, 20, 2, 4);
  EXPECT_EQ(local_spil_forward(nbs, weights, cfg).shape(), (Shape{2, cfg.head_out_dim}));
}

TEST(LocalSpil, FullyMaskedNeighbourhoodUsesUniformAverage) {
  Rng rng(12);
  auto cfg = small_config(PositionVariant::Masking, 2);
  cfg.mask_d = 1e-9;
  auto weights = LocalSpilWeights::init(cfg, rng);
  // Negative psi everywhere: even the unmasked diagonal contributes nothing.
  for (auto& head : weights.heads) head.psi = Linear::constant(2 * cfg.pos_hidden, 1, -1.0, -1.0);
  for (auto& head : weights.heads) {
    for (auto* m : {&head.m1, &head.m2}) {
      for (auto& l : m->layers) l = Linear::constant(l.in_dim(), l.out_dim(), 0.5, 0.1);
    }
  }
  auto nbs = random_neighborhoods(rng, 20, 2, 5, 0.8, 1);
  LocalTrace trace;
  const Tensor out = local_spil_forward(nbs, weights, cfg, &trace);
  for (std::size_t c = 0; c < nbs.size(); ++c) {
    EXPECT_EQ(trace.fallback_rows[c], 5u * cfg.num_heads);
    for (double w : trace.mean_weights[c]) EXPECT_NEAR(w, 0.2, 1e-15);

    // Every row of W X equals the member mean, so max pooling returns relu(mean(X) M) per head.
    const Tensor emb = weights.g(Tensor::from({5, 2}, nbs[c].member_features));
    const Tensor mean = reduce_mean(emb, 0);
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      const auto expected = values(relu(matmul(mean, weights.heads[h].m)));
      for (std::size_t o = 0; o < cfg.head_out_dim; ++o) {
        EXPECT_NEAR(out.at(c, h * cfg.head_out_dim + o), expected[o], 1e-12);
      }
    }
  }
}

TEST(LocalSpil, VariantWithoutPositionNetsRejected) {
  Rng rng(0);
  const auto weights = LocalSpilWeights::init(small_config(PositionVariant::Spacing), rng);
  const auto nbs = random_neighborhoods(rng, 10, 2, 3);
  EXPECT_THROW(local_spil_forward(nbs, weights, small_config(PositionVariant::Masking)), ConfigError);
}

TEST(LocalSpil, DefaultPositionDepths) {
  EXPECT_EQ(small_config(PositionVariant::Spanning).position_layers(), 2u);
  EXPECT_EQ(small_config(PositionVariant::Masking).position_layers(), 2u);
  Rng rng(0);
  const auto w = LocalSpilWeights::init(small_config(PositionVariant::Spanning), rng);
  EXPECT_EQ(w.heads[0].m1.layers.size(), 2u);
  EXPECT_TRUE(LocalSpilWeights::init(small_config(PositionVariant::Spacing), rng).heads[0].m1.layers.empty());
}

TEST(LocalSpil, GradientsMatchFiniteDifferences) {
  for (PositionVariant v : kVariants) {
    Rng rng(77);
    LocalSpilConfig cfg = small_config(v, 2);
    cfg.in_dim = 3;
    cfg.embed_dim = 4;
    auto weights = LocalSpilWeights::init(cfg, rng);
    const auto pts = testing::random_points(12, rng, 2);
    const Tensor feats = testing::random_tensor({12, 3}, rng);
    const auto nbs = ball_query_group(pts, {}, 0, farthest_point_sample(pts, 3), 0.9, 4);

    ParameterSet params;
    weights.visit("local", [&](const std::string& name, Tensor& t) { params.add(name, t); });
    const auto report = finite_difference_check(
        [&] { return testing::readout(local_spil_forward(nbs, feats, weights, cfg)); }, params, 1e-6);
    EXPECT_LT(report.max_error, 1e-4) << to_string(v) << " worst " << report.worst_parameter;
    EXPECT_EQ(report.checked_elements, params.element_count());
  }
}

}  // namespace
}  // namespace spil
