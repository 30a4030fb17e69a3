#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "kinaffect/config.hpp"
#include "kinaffect/core.hpp"

namespace kinaffect {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

double distance(Point2 a, Point2 b);

enum class KeypointState : std::uint8_t { Valid, Interpolated, Stale };

struct CleanKeypoint {
  double x = 0.0;
  double y = 0.0;
  KeypointState state = KeypointState::Stale;

  bool usable() const { return state != KeypointState::Stale; }
  bool operator==(const CleanKeypoint&) const = default;
};

struct CleanTrack {
  int track_id = 0;
  int person_id = 0;         // id of the detection last assigned to this track
  std::uint32_t generation = 0;  // bumps each time the slot is reopened
  std::array<CleanKeypoint, kNumKeypoints> keypoints{};
  std::optional<double> body_scale;  // nullopt while uncalibrated

  bool operator==(const CleanTrack&) const = default;
};

struct CleanFrame {
  double timestamp = 0.0;
  std::vector<CleanTrack> tracks;  // sorted by track_id

  const CleanTrack* find(int track_id) const;
  bool operator==(const CleanFrame&) const = default;
};

// ---------------------------------------------------------------------------
// Stage operations
// ---------------------------------------------------------------------------

/// Marks keypoints with confidence below `threshold` invalid.
PoseFrame gate_confidence(PoseFrame frame, double threshold);

/// Mean of the valid keypoints; nullopt if none are valid.
std::optional<Point2> detection_centroid(const Skeleton& skeleton);

struct TrackCentroid {
  int track_id = 0;
  Point2 centroid;
};

struct TrackAssignment {
  std::vector<std::pair<std::size_t, int>> matched;  // (detection index, track id)
  std::vector<std::size_t> unmatched_detections;
  std::vector<int> unmatched_tracks;
};

/// Greedy nearest-centroid matching: repeatedly takes the closest remaining
/// (detection, track) pair within `gate`.
TrackAssignment assign_tracks(std::span<const Point2> detections, std::span<const TrackCentroid> tracks, double gate);

/// Per-coordinate exponential smoothing: y_t = alpha*x_t + (1-alpha)*y_{t-1}.
double smooth_step(double previous, double sample, double alpha);
std::vector<double> smooth(std::span<const double> samples, double alpha);

/// Causal gap filler + smoother for one keypoint.
class KeypointFilter {
 public:
  /// `observation` is nullptr (or invalid) when the keypoint is missing.
  CleanKeypoint update(const Keypoint* observation, double alpha, int max_gap_frames);

  /// Equivalent to update(nullptr, ...).
  CleanKeypoint fill_gap(int max_gap_frames);

  int misses() const { return misses_; }
  const std::optional<Point2>& value() const { return value_; }

 private:
  std::optional<Point2> value_;
  int misses_ = 0;
};

/// Running median of torso length over a trailing time window.
class BodyScaleCalibrator {
 public:
  BodyScaleCalibrator() = default;
  explicit BodyScaleCalibrator(double window_s) : window_s_(window_s) {}

  /// `torso` is nullopt when shoulders/hips are not all valid this frame.
  /// Returns the current scale, or nullopt while uncalibrated.
  std::optional<double> update(double timestamp, std::optional<double> torso);

  std::optional<double> scale() const { return scale_; }
  bool calibrated() const { return scale_.has_value(); }

  static constexpr double kMinScale = 0.01;

 private:
  double window_s_ = 2.0;
  std::deque<std::pair<double, double>> samples_;
  std::optional<double> scale_;
};

/// Distance between shoulder midpoint and hip midpoint when all four are
/// fresh (Valid) this frame.
std::optional<double> torso_length(const std::array<CleanKeypoint, kNumKeypoints>& keypoints);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Single-writer stage turning validated PoseFrames into CleanFrames.
class PosePipeline {
 public:
  explicit PosePipeline(const EngineConfig& config);

  CleanFrame process(const PoseFrame& frame, EventLog* events = nullptr);
  void reset();

 private:
  struct Track {
    bool live = false;
    std::uint32_t generation = 0;
    int person_id = 0;
    int staleness = 0;
    Point2 centroid;
    std::array<KeypointFilter, kNumKeypoints> filters{};
    std::array<CleanKeypoint, kNumKeypoints> current{};
    BodyScaleCalibrator calibrator;
  };

  void open_track(Track& track, int track_id, const PersonPose& person, double t, EventLog* events);
  void update_track(Track& track, int track_id, const PersonPose* person, double t, EventLog* events);

  double threshold_;
  double alpha_;
  int max_gap_;
  double gate_;
  double calibration_window_s_;
  std::vector<Track> tracks_;
};

}  // namespace kinaffect
