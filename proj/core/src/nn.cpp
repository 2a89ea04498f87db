// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/nn.hpp"

#include <cmath>

#include "spil/error.hpp"

namespace spil {

Linear Linear::kaiming(std::size_t in, std::size_t out, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::zeros({1, out}, true)};
}

Linear Linear::identity(std::size_t dim) {
  std::vector<double> w(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
  return {Tensor::from({dim, dim}, std::move(w), true), Tensor::zeros({1, dim}, true)};
}

Linear Linear::constant(std::size_t in, std::size_t out, double weight, double bias) {
  return {Tensor::from({in, out}, std::vector<double>(in * out, weight), true),
          Tensor::from({1, out}, std::vector<double>(out, bias), true)};
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return add(y, broadcast(bias, y.shape()));
}

Mlp Mlp::kaiming(const std::vector<std::size_t>& widths, Rng& rng) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least an input and an output width");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) mlp.layers.push_back(Linear::kaiming(widths[i], widths[i + 1], rng));
  return mlp;
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

}  // namespace spil
