// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Pose sequences, skeleton point clouds, and the conversions between them.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spil {

inline constexpr std::size_t kNumJoints = 18;

using Vec3 = std::array<double, 3>;

/// Joint indices in the 18-point kinetics-skeleton layout.
enum Joint : std::size_t {
  kNose = 0,
  kNeck = 1,
  kRightShoulder = 2,
  kRightElbow = 3,
  kRightWrist = 4,
  kLeftShoulder = 5,
  kLeftElbow = 6,
  kLeftWrist = 7,
  kRightHip = 8,
  kRightKnee = 9,
  kRightAnkle = 10,
  kLeftHip = 11,
  kLeftKnee = 12,
  kLeftAnkle = 13,
  kRightEye = 14,
  kLeftEye = 15,
  kRightEar = 16,
  kLeftEar = 17,
};

enum class BodyPart { Head, Hands, Feet, Body };

/// Head = nose, eyes, ears; hands = elbows, wrists; feet = knees, ankles;
/// body = neck, shoulders, hips.
BodyPart body_part(std::size_t joint);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
};

struct Person {
  std::array<Keypoint, kNumJoints> joints{};
};

struct Frame {
  std::int64_t t = 0;
  std::vector<Person> persons;
};

struct PoseSequence {
  std::string video_id;
  std::vector<Frame> frames;
  int label = 0;
  double frame_width = 1.0;
  double frame_height = 1.0;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;
};

struct PartConstants {
  double head = 0.2;
  double hands = 0.8;
  double feet = 0.6;
  double body = 0.4;

  double value(BodyPart part) const;
};

/// Per-point feature: (confidence, body-part constant).
using PointFeature = std::array<double, 2>;

struct SkeletonPointCloud {
  std::vector<Vec3> points;  // x, y in [0,1]; z = frame position
  std::vector<PointFeature> features;
  int label = 0;
  std::size_t num_frames = 0;

  std::size_t size() const { return points.size(); }
};

struct AugmentConfig {
  bool enabled = true;
  double jitter_sigma = 0.01;
  double rotate_max = 0.1 * 3.14159265358979323846;
  std::uint64_t seed = 0;
};

inline constexpr double kDefaultConfThreshold = 0.05;

// --- pose file I/O (JSON lines) ---

PoseSequence pose_from_json(const nlohmann::json& j, std::size_t line = 0);
nlohmann::json pose_to_json(const PoseSequence& seq);

std::vector<PoseSequence> parse_pose_stream(std::istream& in);
std::vector<PoseSequence> parse_pose_file(const std::filesystem::path& path);
void write_pose_stream(std::ostream& out, const std::vector<PoseSequence>& seqs);
void write_pose_file(const std::filesystem::path& path, const std::vector<PoseSequence>& seqs);

// --- point clouds ---

/// One point per joint with confidence >= conf_threshold. Throws ValidationError
/// when nothing survives the threshold.
SkeletonPointCloud build_point_cloud(const PoseSequence& seq, const PartConstants& constants = {},
                                     double conf_threshold = kDefaultConfThreshold);

/// Rotates x,y about the cloud's spatial centroid by one uniform angle in
/// [-rotate_max, rotate_max], adds Gaussian jitter, clamps to [0,1]. z, features
/// and label are untouched. Identity when cfg.enabled is false.
SkeletonPointCloud augment(const SkeletonPointCloud& cloud, const AugmentConfig& cfg);

nlohmann::json cloud_to_json(const SkeletonPointCloud& cloud);
SkeletonPointCloud cloud_from_json(const nlohmann::json& j, std::size_t line = 0);

// --- synthetic data ---

struct SynthOptions {
  std::size_t frames = 8;
  std::size_t persons = 2;
  double frame_width = 320.0;
  double frame_height = 240.0;
  double dropout_probability = 0.03;  // chance a joint is reported undetected
};

/// Balanced labelled toy set. Label 1: two skeletons closing in with fast,
/// large wrist and ankle strikes toward each other. Label 0: smooth slow gait
/// or idling. Both classes share frame and person counts.
std::vector<PoseSequence> generate_synthetic(std::size_t n_samples, std::uint64_t seed, const SynthOptions& opts = {});

}  // namespace spil
