// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Set-abstraction front end: farthest-point sampling and radius grouping.

#pragma once

#include <span>
#include <vector>

#include "spil/pose.hpp"

namespace spil {

struct SampledCentroids {
  std::vector<std::size_t> indices;
  std::vector<Vec3> coords;
};

/// Greedy FPS. The first pick is `start`; each next pick maximizes the
/// squared Euclidean distance to its nearest already-picked point, lowest
/// index on ties. When n exceeds the point count every point is taken once
/// and the selection then repeats cyclically up to length n.
SampledCentroids farthest_point_sample(std::span<const Vec3> coords, std::size_t n, std::size_t start = 0);

/// A centroid and exactly k member points (member 0 is the centroid).
struct Neighborhood {
  std::size_t centroid_index = 0;
  std::vector<std::size_t> member_indices;
  std::vector<Vec3> member_coords;
  std::vector<double> member_features;  // k x feature_dim, row-major; empty when grouped without features
  std::size_t feature_dim = 0;
  double radius = 0.0;

  std::size_t size() const { return member_indices.size(); }
};

/// Ball query in index order: slot 0 holds the centroid, then the first points
/// (by index, excluding the centroid) within `radius`, until k are collected.
/// Short neighborhoods are padded by repeating the centroid.
/// `features` is M x feature_dim row-major and may be empty (feature_dim 0).
std::vector<Neighborhood> ball_query_group(std::span<const Vec3> coords, std::span<const double> features,
                                           std::size_t feature_dim, const SampledCentroids& centroids, double radius,
                                           std::size_t k);

double squared_distance(const Vec3& a, const Vec3& b);

}  // namespace spil
