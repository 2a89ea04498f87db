// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Small building blocks shared by the Local- and Global-SPIL layers.

#pragma once

#include <string>
#include <vector>

#include "spil/random.hpp"
#include "spil/tensor.hpp"

namespace spil {

/// Affine map on row vectors: y = x W + b, W is in x out, b is 1 x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  /// Kaiming-uniform weights (bound gain * sqrt(6 / fan_in)), zero bias.
  static Linear kaiming(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
  static Linear identity(std::size_t dim);
  static Linear constant(std::size_t in, std::size_t out, double weight, double bias = 0.0);

  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }

  /// x is n x in; returns n x out.
  Tensor operator()(const Tensor& x) const;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

/// Stack of Linear layers with ReLU between consecutive layers (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  static Mlp kaiming(const std::vector<std::size_t>& widths, Rng& rng);

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  Tensor operator()(const Tensor& x) const;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].visit(prefix + ".fc" + std::to_string(i), f);
  }
};

/// Row-major n x 3 constant tensor from coordinate triples.
template <class Vec3Range>
Tensor coords_tensor(const Vec3Range& coords) {
  std::vector<double> flat;
  flat.reserve(coords.size() * 3);
  for (const auto& p : coords) flat.insert(flat.end(), p.begin(), p.end());
  return Tensor::from({coords.size(), 3}, std::move(flat));
}

}  // namespace spil
