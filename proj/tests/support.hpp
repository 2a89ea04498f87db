// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Shared generators and helpers for the unit tests.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "spil/pose.hpp"
#include "spil/random.hpp"
#include "spil/tensor.hpp"

namespace spil::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = u(rng);
  return Tensor::from(shape, std::move(v), requires_grad);
}

/// Scalar readout sum_i w_i t_i with fixed random weights, so every element
/// of t gets a distinct upstream gradient.
inline Tensor readout(const Tensor& t, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Tensor flat = reshape(t, {1, t.size()});
  const Tensor w = random_tensor({1, t.size()}, rng, 0.5, 1.5);
  return reduce_sum(mul(flat, w), 1);
}

/// x, y uniform in [0, 1], z an integer frame index in [0, frames).
inline std::vector<Vec3> random_points(std::size_t n, Rng& rng, std::size_t frames = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> f(0, frames - 1);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), static_cast<double>(f(rng))};
  return pts;
}

#ifdef SPIL_TEST_TMP
/// Fresh empty directory under the build tree.
inline std::filesystem::path temp_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(SPIL_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
#endif

inline std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace spil::testing
