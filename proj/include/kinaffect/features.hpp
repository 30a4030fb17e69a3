#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "kinaffect/config.hpp"
#include "kinaffect/pose_pipeline.hpp"

namespace kinaffect {

/// Windowed movement descriptors for one tracked person. Spatial quantities
/// are expressed in body lengths (torso length).
struct FeatureVector {
  double speed = 0.0;      // mean centroid speed, body-lengths/s
  double energy = 0.0;     // mean squared keypoint speed
  double amplitude = 0.0;  // mean bounding-box diagonal
  double expansion = 0.0;  // mean wrist/ankle distance from centroid
  double jerk = 0.0;       // mean |third difference| of centroid, body-lengths/s^3
  double frequency = 0.0;  // vertical-velocity zero crossings / (2W), Hz
  double qom = 0.0;        // fraction of keypoints moving > threshold per frame
  double rom = 0.0;        // range of bounding-box diagonal over the window

  std::array<double, kNumFeatures> values() const;
  bool operator==(const FeatureVector&) const = default;
};

using NormalizedFeatures = std::array<double, kNumFeatures>;

struct GroupFeatures {
  int count = 0;
  double proximity = 0.0;  // 1 = all at one point, 0 = at least proximity_scale apart
  double synchrony = 1.0;  // mean pairwise Pearson r of centroid-speed series

  bool operator==(const GroupFeatures&) const = default;
};

struct FeatureParams {
  double window_s = 1.0;
  double qom_threshold = 0.02;
  double frequency_deadband = 0.05;
  double proximity_scale = 0.5;
  double min_valid_fraction = 0.5;

  static FeatureParams from(const EngineConfig& config);
};

/// Features for `track_id` over `window` (time-ordered CleanFrames). Returns
/// nullopt when the window is insufficient: the track is uncalibrated or
/// present in fewer than half of the frames (or fewer than four).
std::optional<FeatureVector> extract_features(std::span<const CleanFrame> window, int track_id,
                                              const FeatureParams& params);

/// Group context over every track in the window that yields features.
GroupFeatures extract_group(std::span<const CleanFrame> window, const FeatureParams& params);

/// Per-feature affine map into [0,1], clamped.
NormalizedFeatures normalize(const FeatureVector& features, std::span<const Range, kNumFeatures> ranges);

/// Pearson correlation; 0 when either series has zero variance or n < 2.
double pearson(std::span<const double> a, std::span<const double> b);

/// Counts sign changes of `series` with a symmetric deadband: a crossing is
/// registered only once the value leaves [-deadband, deadband] on the
/// opposite side.
int count_zero_crossings(std::span<const double> series, double deadband);

}  // namespace kinaffect
