// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/pose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spil/error.hpp"
#include "spil/random.hpp"

namespace spil {

using nlohmann::json;

BodyPart body_part(std::size_t joint) {
  switch (joint) {
    case kNose:
    case kRightEye:
    case kLeftEye:
    case kRightEar:
    case kLeftEar:
      return BodyPart::Head;
    case kRightElbow:
    case kRightWrist:
    case kLeftElbow:
    case kLeftWrist:
      return BodyPart::Hands;
    case kRightKnee:
    case kRightAnkle:
    case kLeftKnee:
    case kLeftAnkle:
      return BodyPart::Feet;
    case kNeck:
    case kRightShoulder:
    case kLeftShoulder:
    case kRightHip:
    case kLeftHip:
      return BodyPart::Body;
    default:
      throw ValidationError("joint index " + std::to_string(joint) + " outside the 18-joint layout");
  }
}

double PartConstants::value(BodyPart part) const {
  switch (part) {
    case BodyPart::Head:
      return head;
    case BodyPart::Hands:
      return hands;
    case BodyPart::Feet:
      return feet;
    case BodyPart::Body:
      return body;
  }
  return body;
}

void PoseSequence::validate() const {
  if (frames.empty()) throw ValidationError(video_id + ": sequence must contain at least 1 frame");
  if (label != 0 && label != 1) throw ValidationError(video_id + ": label must be 0 or 1");
  if (!(frame_width > 0.0) || !(frame_height > 0.0)) {
    throw ValidationError(video_id + ": frame_width and frame_height must be positive");
  }
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].t < 0) throw ValidationError(video_id + ": frame index t must be >= 0");
    if (f > 0 && frames[f].t <= frames[f - 1].t) {
      throw ValidationError(video_id + ": frame indices must be strictly increasing (t=" +
                            std::to_string(frames[f - 1].t) + " then t=" + std::to_string(frames[f].t) + ")");
    }
    for (const Person& p : frames[f].persons) {
      for (const Keypoint& k : p.joints) {
        if (!(k.confidence >= 0.0 && k.confidence <= 1.0)) {
          throw ValidationError(video_id + ": joint confidence must lie in [0,1]");
        }
        if (!std::isfinite(k.x) || !std::isfinite(k.y)) throw ValidationError(video_id + ": non-finite coordinate");
      }
    }
  }
}

PoseSequence pose_from_json(const json& j, std::size_t line) {
  PoseSequence seq;
  try {
    seq.video_id = j.at("video_id").get<std::string>();
    seq.label = j.at("label").get<int>();
    seq.frame_width = j.at("frame_width").get<double>();
    seq.frame_height = j.at("frame_height").get<double>();
    for (const json& jf : j.at("frames")) {
      Frame frame;
      frame.t = jf.at("t").get<std::int64_t>();
      for (const json& jp : jf.at("persons")) {
        const json& joints = jp.at("joints");
        if (!joints.is_array() || joints.size() != kNumJoints) {
          const std::size_t got = joints.is_array() ? joints.size() : 0;
          throw ValidationError("expected 18 joints, got " + std::to_string(got));
        }
        Person person;
        for (std::size_t k = 0; k < kNumJoints; ++k) {
          const json& jk = joints[k];
          if (!jk.is_array() || jk.size() != 3) throw ParseError("joint must be [x, y, confidence]", line);
          person.joints[k] = {jk[0].get<double>(), jk[1].get<double>(), jk[2].get<double>()};
        }
        frame.persons.push_back(person);
      }
      seq.frames.push_back(std::move(frame));
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line);
  } catch (const ValidationError& e) {
    throw ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + e.what() : e.what());
  }
  try {
    seq.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + e.what() : e.what());
  }
  return seq;
}

json pose_to_json(const PoseSequence& seq) {
  json frames = json::array();
  for (const Frame& f : seq.frames) {
    json persons = json::array();
    for (const Person& p : f.persons) {
      json joints = json::array();
      for (const Keypoint& k : p.joints) joints.push_back({k.x, k.y, k.confidence});
      persons.push_back({{"joints", std::move(joints)}});
    }
    frames.push_back({{"t", f.t}, {"persons", std::move(persons)}});
  }
  return {{"video_id", seq.video_id},
          {"label", seq.label},
          {"frame_width", seq.frame_width},
          {"frame_height", seq.frame_height},
          {"frames", std::move(frames)}};
}

std::vector<PoseSequence> parse_pose_stream(std::istream& in) {
  std::vector<PoseSequence> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line);
    }
    out.push_back(pose_from_json(j, line));
  }
  return out;
}

std::vector<PoseSequence> parse_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file " + path.string());
  return parse_pose_stream(in);
}

void write_pose_stream(std::ostream& out, const std::vector<PoseSequence>& seqs) {
  for (const auto& s : seqs) out << pose_to_json(s).dump() << '\n';
}

void write_pose_file(const std::filesystem::path& path, const std::vector<PoseSequence>& seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pose_stream(out, seqs);
  if (!out) throw IoError("write failed: " + path.string());
}

SkeletonPointCloud build_point_cloud(const PoseSequence& seq, const PartConstants& constants, double conf_threshold) {
  seq.validate();
  SkeletonPointCloud cloud;
  cloud.label = seq.label;
  cloud.num_frames = seq.frames.size();
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    for (const Person& person : seq.frames[f].persons) {
      for (std::size_t k = 0; k < kNumJoints; ++k) {
        const Keypoint& kp = person.joints[k];
        if (kp.confidence < conf_threshold) continue;
        // Detectors occasionally report joints just outside the frame.
        const double x = std::clamp(kp.x / seq.frame_width, 0.0, 1.0);
        const double y = std::clamp(kp.y / seq.frame_height, 0.0, 1.0);
        cloud.points.push_back({x, y, static_cast<double>(f)});
        cloud.features.push_back({kp.confidence, constants.value(body_part(k))});
      }
    }
  }
  if (cloud.points.empty()) {
    throw ValidationError(seq.video_id + ": no joint reaches confidence threshold " + std::to_string(conf_threshold));
  }
  return cloud;
}

SkeletonPointCloud augment(const SkeletonPointCloud& cloud, const AugmentConfig& cfg) {
  SkeletonPointCloud out = cloud;
  if (!cfg.enabled || cloud.points.empty()) return out;
  Rng rng(cfg.seed);

  if (cfg.rotate_max > 0.0) {
    double cx = 0.0, cy = 0.0;
    for (const Vec3& p : cloud.points) {
      cx += p[0];
      cy += p[1];
    }
    cx /= static_cast<double>(cloud.points.size());
    cy /= static_cast<double>(cloud.points.size());
    const double angle = std::uniform_real_distribution<double>(-cfg.rotate_max, cfg.rotate_max)(rng);
    const double c = std::cos(angle), s = std::sin(angle);
    for (Vec3& p : out.points) {
      const double dx = p[0] - cx, dy = p[1] - cy;
      p[0] = cx + c * dx - s * dy;
      p[1] = cy + s * dx + c * dy;
    }
  }
  if (cfg.jitter_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.jitter_sigma);
    for (Vec3& p : out.points) {
      p[0] += noise(rng);
      p[1] += noise(rng);
    }
  }
  for (Vec3& p : out.points) {
    p[0] = std::clamp(p[0], 0.0, 1.0);
    p[1] = std::clamp(p[1], 0.0, 1.0);
  }
  return out;
}

json cloud_to_json(const SkeletonPointCloud& cloud) {
  json points = json::array();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    points.push_back({p[0], p[1], p[2], cloud.features[i][0], cloud.features[i][1]});
  }
  return {{"label", cloud.label}, {"num_frames", cloud.num_frames}, {"points", std::move(points)}};
}

SkeletonPointCloud cloud_from_json(const json& j, std::size_t line) {
  SkeletonPointCloud cloud;
  try {
    cloud.label = j.at("label").get<int>();
    cloud.num_frames = j.at("num_frames").get<std::size_t>();
    for (const json& jp : j.at("points")) {
      if (!jp.is_array() || jp.size() != 5) throw ParseError("point must be [x, y, z, confidence, part]", line);
      cloud.points.push_back({jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>()});
      cloud.features.push_back({jp[3].get<double>(), jp[4].get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line);
  }
  if (cloud.label != 0 && cloud.label != 1) throw ValidationError("cloud label must be 0 or 1");
  if (cloud.points.empty()) throw ValidationError("cloud has no points");
  return cloud;
}

}  // namespace spil
