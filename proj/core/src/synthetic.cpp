// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spil/error.hpp"
#include "spil/pose.hpp"
#include "spil/random.hpp"

namespace spil {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Joint offsets from the pelvis centre in body-height units, image y pointing down.
constexpr std::array<std::array<double, 2>, kNumJoints> kTemplate = {{
    {0.00, -0.88},   // nose
    {0.00, -0.72},   // neck
    {-0.16, -0.70},  // right shoulder
    {-0.22, -0.47},  // right elbow
    {-0.24, -0.25},  // right wrist
    {0.16, -0.70},   // left shoulder
    {0.22, -0.47},   // left elbow
    {0.24, -0.25},   // left wrist
    {-0.10, 0.00},   // right hip
    {-0.11, 0.35},   // right knee
    {-0.12, 0.70},   // right ankle
    {0.10, 0.00},    // left hip
    {0.11, 0.35},    // left knee
    {0.12, 0.70},    // left ankle
    {-0.04, -0.92},  // right eye
    {0.04, -0.92},   // left eye
    {-0.08, -0.90},  // right ear
    {0.08, -0.90},   // left ear
}};

struct Limb {
  std::size_t distal;
  std::size_t proximal;  // moves half as far as the distal joint
};

constexpr std::array<Limb, 2> kArms = {{{kRightWrist, kRightElbow}, {kLeftWrist, kLeftElbow}}};
constexpr std::array<Limb, 2> kLegs = {{{kRightAnkle, kRightKnee}, {kLeftAnkle, kLeftKnee}}};

struct Motion {
  double x0 = 0.5;        // pelvis x at frame 0 (normalized)
  double vx = 0.0;        // pelvis drift per frame
  double y = 0.6;         // pelvis y
  double height = 0.3;    // body height (normalized)
  double facing = 1.0;    // +1 strikes toward +x
  double arm_amp = 0.0;   // wrist displacement amplitude
  double leg_amp = 0.0;   // ankle displacement amplitude
  double omega = 0.5;     // rad per frame
  double phase = 0.0;
  bool strikes = false;   // one-sided thrusts toward `facing` instead of symmetric swing
};

Person pose_at(const Motion& m, std::size_t frame, const SynthOptions& opts, double conf_lo, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.004);
  std::uniform_real_distribution<double> conf(conf_lo, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double t = static_cast<double>(frame);
  const double cx = m.x0 + m.vx * t;
  std::array<std::array<double, 2>, kNumJoints> xy{};
  for (std::size_t k = 0; k < kNumJoints; ++k) {
    xy[k] = {cx + kTemplate[k][0] * m.height * 0.75, m.y + kTemplate[k][1] * m.height};
  }

  auto swing = [&](double offset) {
    const double s = std::sin(m.omega * t + m.phase + offset);
    return m.strikes ? std::max(0.0, s) : s;
  };
  for (std::size_t a = 0; a < 2; ++a) {
    const double s = swing(a == 0 ? 0.0 : kPi * 0.5);
    const double dx = m.strikes ? m.facing * m.arm_amp * s : m.arm_amp * s * 0.3;
    const double dy = m.strikes ? -0.6 * m.arm_amp * s : m.arm_amp * s;
    xy[kArms[a].distal][0] += dx;
    xy[kArms[a].distal][1] += dy;
    xy[kArms[a].proximal][0] += 0.5 * dx;
    xy[kArms[a].proximal][1] += 0.5 * dy;
  }
  for (std::size_t l = 0; l < 2; ++l) {
    const double s = swing(l == 0 ? kPi : kPi * 1.5);
    const double dx = m.strikes ? m.facing * m.leg_amp * s : m.leg_amp * s;
    const double dy = m.strikes ? -0.5 * m.leg_amp * s : 0.0;
    xy[kLegs[l].distal][0] += dx;
    xy[kLegs[l].distal][1] += dy;
    xy[kLegs[l].proximal][0] += 0.5 * dx;
    xy[kLegs[l].proximal][1] += 0.5 * dy;
  }

  Person person;
  for (std::size_t k = 0; k < kNumJoints; ++k) {
    const double x = std::clamp(xy[k][0] + noise(rng), 0.0, 1.0);
    const double y = std::clamp(xy[k][1] + noise(rng), 0.0, 1.0);
    double c = conf(rng);
    if (unit(rng) < opts.dropout_probability) c = 0.0;
    person.joints[k] = {x * opts.frame_width, y * opts.frame_height, c};
  }
  return person;
}

std::vector<Motion> violent_scene(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double centre = range(0.42, 0.58);
  const double gap = range(0.30, 0.40);
  const double speed = range(0.012, 0.02);
  const double omega = range(2.2, 3.0);
  std::vector<Motion> people(2);
  for (std::size_t p = 0; p < 2; ++p) {
    Motion& m = people[p];
    const double side = p == 0 ? -1.0 : 1.0;
    m.x0 = centre + side * gap * 0.5;
    m.vx = -side * speed;
    m.y = range(0.55, 0.65);
    m.height = range(0.30, 0.38);
    m.facing = -side;
    m.arm_amp = range(0.08, 0.14);
    m.leg_amp = range(0.04, 0.08);
    m.omega = omega * range(0.9, 1.1);
    m.phase = range(0.0, 2.0 * kPi);
    m.strikes = true;
  }
  return people;
}

std::vector<Motion> calm_scene(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  std::vector<Motion> people(2);
  for (std::size_t p = 0; p < 2; ++p) {
    Motion& m = people[p];
    m.x0 = p == 0 ? range(0.15, 0.32) : range(0.68, 0.85);
    const bool walking = u(rng) < 0.6;
    m.vx = walking ? (u(rng) < 0.5 ? -1.0 : 1.0) * range(0.004, 0.012) : 0.0;
    m.y = range(0.55, 0.65);
    m.height = range(0.30, 0.38);
    m.arm_amp = walking ? range(0.015, 0.03) : range(0.0, 0.01);
    m.leg_amp = walking ? range(0.015, 0.03) : 0.0;
    m.omega = range(0.3, 0.6);
    m.phase = range(0.0, 2.0 * kPi);
  }
  return people;
}

}  // namespace

std::vector<PoseSequence> generate_synthetic(std::size_t n_samples, std::uint64_t seed, const SynthOptions& opts) {
  if (n_samples < 2) throw ValidationError("generate_synthetic needs at least 2 samples");
  if (opts.frames == 0 || opts.persons == 0) throw ValidationError("synthetic sequences need frames and persons");
  std::vector<PoseSequence> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, i));
    PoseSequence seq;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05zu", i);
    seq.video_id = id;
    seq.label = static_cast<int>(i % 2);
    seq.frame_width = opts.frame_width;
    seq.frame_height = opts.frame_height;

    std::vector<Motion> people = seq.label == 1 ? violent_scene(rng) : calm_scene(rng);
    // Extra people beyond the interacting pair are calm bystanders in both classes.
    while (people.size() < opts.persons) {
      auto extra = calm_scene(rng);
      people.push_back(extra[people.size() % 2]);
    }
    people.resize(opts.persons);

    for (std::size_t f = 0; f < opts.frames; ++f) {
      Frame frame;
      frame.t = static_cast<std::int64_t>(f);
      for (const Motion& m : people) frame.persons.push_back(pose_at(m, f, opts, 0.55, rng));
      seq.frames.push_back(std::move(frame));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace spil
