// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/sampling.hpp"

#include <limits>

#include "spil/error.hpp"

namespace spil {

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

SampledCentroids farthest_point_sample(std::span<const Vec3> coords, std::size_t n, std::size_t start) {
  const std::size_t m = coords.size();
  if (m == 0) throw ValidationError("farthest_point_sample: empty point set");
  if (n == 0) throw ValidationError("farthest_point_sample: n must be >= 1");
  if (start >= m) throw ValidationError("farthest_point_sample: start index out of range");

  SampledCentroids out;
  out.indices.reserve(n);
  const std::size_t distinct = std::min(n, m);
  std::vector<double> nearest(m, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(m, false);
  std::size_t pick = start;
  for (std::size_t s = 0; s < distinct; ++s) {
    out.indices.push_back(pick);
    taken[pick] = true;
    std::size_t next = m;
    double best = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (taken[i]) continue;
      nearest[i] = std::min(nearest[i], squared_distance(coords[i], coords[pick]));
      if (nearest[i] > best) {
        best = nearest[i];
        next = i;
      }
    }
    pick = next;
  }
  for (std::size_t s = distinct; s < n; ++s) out.indices.push_back(out.indices[s % distinct]);
  out.coords.reserve(n);
  for (std::size_t idx : out.indices) out.coords.push_back(coords[idx]);
  return out;
}

std::vector<Neighborhood> ball_query_group(std::span<const Vec3> coords, std::span<const double> features,
                                           std::size_t feature_dim, const SampledCentroids& centroids, double radius,
                                           std::size_t k) {
  if (!(radius > 0.0)) throw ValidationError("ball_query_group: radius must be positive");
  if (k == 0) throw ValidationError("ball_query_group: k must be >= 1");
  if (features.size() != coords.size() * feature_dim) {
    throw ValidationError("ball_query_group: feature buffer does not match point count");
  }
  const double r2 = radius * radius;
  std::vector<Neighborhood> out;
  out.reserve(centroids.indices.size());
  for (std::size_t centre : centroids.indices) {
    if (centre >= coords.size()) throw ValidationError("ball_query_group: centroid index out of range");
    Neighborhood nb;
    nb.centroid_index = centre;
    nb.radius = radius;
    nb.feature_dim = feature_dim;
    nb.member_indices.reserve(k);
    nb.member_indices.push_back(centre);
    for (std::size_t i = 0; i < coords.size() && nb.member_indices.size() < k; ++i) {
      if (i != centre && squared_distance(coords[i], coords[centre]) <= r2) nb.member_indices.push_back(i);
    }
    while (nb.member_indices.size() < k) nb.member_indices.push_back(centre);
    for (std::size_t idx : nb.member_indices) {
      nb.member_coords.push_back(coords[idx]);
      const auto row = features.subspan(idx * feature_dim, feature_dim);
      nb.member_features.insert(nb.member_features.end(), row.begin(), row.end());
    }
    out.push_back(std::move(nb));
  }
  return out;
}

}  // namespace spil
