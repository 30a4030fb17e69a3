#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "kinaffect/core.hpp"
#include "kinaffect/pose_pipeline.hpp"

namespace testing {

using namespace kinaffect;

// Standing pose in body lengths, hip midpoint at the origin, y down.
inline const std::array<std::array<double, 2>, kNumKeypoints>& standing_offsets() {
  static const std::array<std::array<double, 2>, kNumKeypoints> k = {{
      {0.0, -1.45},  {0.08, -1.55}, {-0.08, -1.55}, {0.18, -1.5},  {-0.18, -1.5}, {0.4, -1.0},
      {-0.4, -1.0},  {0.45, -0.5},  {-0.45, -0.5},  {0.45, 0.0},   {-0.45, 0.0},  {0.25, 0.0},
      {-0.25, 0.0},  {0.27, 0.9},   {-0.27, 0.9},   {0.25, 1.8},   {-0.25, 1.8},
  }};
  return k;
}

inline Skeleton standing(double cx, double cy, double body = 0.2, double conf = 1.0) {
  Skeleton s{};
  for (std::size_t j = 0; j < kNumKeypoints; ++j) {
    s[j].x = cx + body * standing_offsets()[j][0];
    s[j].y = cy + body * standing_offsets()[j][1];
    s[j].confidence = conf;
    s[j].valid = true;
  }
  return s;
}

inline PoseFrame frame_of(double t, std::vector<PersonPose> persons) {
  PoseFrame f;
  f.timestamp = t;
  f.persons = std::move(persons);
  return f;
}

// A calibrated, fully valid track whose keypoints are the standing pose
// shifted by (dx, dy) image units.
inline CleanTrack clean_track(int id, double cx, double cy, double body = 0.2) {
  CleanTrack tr;
  tr.track_id = id;
  tr.person_id = id;
  tr.body_scale = body;
  const Skeleton s = standing(cx, cy, body);
  for (std::size_t j = 0; j < kNumKeypoints; ++j) tr.keypoints[j] = {s[j].x, s[j].y, KeypointState::Valid};
  return tr;
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace testing
