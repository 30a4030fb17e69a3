#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kinaffect {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
  NonMonotonicTimestamp,
  WrongKeypointCount,
  ParseError,
  InvariantViolation,
  InsufficientWindow,
  LabelSetMismatch,
  InvalidLabel,
  SegmentTooShort,
  IllegalTransition,
  WrongPhase,
  UnsupportedType,
  MalformedPacket,
  SocketError,
  BadVersion,
  BadLength,
  BadBase64,
  BindError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Keypoints and frames
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNumKeypoints = 17;
inline constexpr std::size_t kDefaultMaxPersons = 3;

// COCO ordering.
enum class Joint : std::uint8_t {
  Nose = 0,
  LeftEye,
  RightEye,
  LeftEar,
  RightEar,
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
  LeftAnkle,
  RightAnkle,
};

constexpr std::size_t idx(Joint j) { return static_cast<std::size_t>(j); }

std::string_view joint_name(std::size_t index);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;
  bool valid = true;

  bool operator==(const Keypoint&) const = default;
};

using Skeleton = std::array<Keypoint, kNumKeypoints>;

struct PersonPose {
  int id = 0;
  Skeleton keypoints{};

  bool operator==(const PersonPose&) const = default;
};

enum class FrameSource : std::uint8_t { Recording, Synthetic, Live };

struct PoseFrame {
  double timestamp = 0.0;
  std::vector<PersonPose> persons;
  FrameSource source = FrameSource::Recording;

  bool operator==(const PoseFrame&) const = default;
};

// Unvalidated frame as it comes off an input adapter.
struct RawPerson {
  int id = 0;
  std::vector<std::array<double, 3>> keypoints;  // x, y, confidence
};

struct RawFrame {
  double timestamp = 0.0;
  std::vector<RawPerson> persons;
  FrameSource source = FrameSource::Recording;
};

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

enum class EventKind : std::uint8_t {
  CoordinateClamped,
  PersonDropped,
  KeypointStale,
  TrackOpened,
  TrackRetired,
  Calibrated,
  PhaseChanged,
  TrendShift,
  Adapted,
  AdaptationSuppressed,
  TeachSegmentRejected,
  TeachSegmentCommitted,
  SocketError,
};

std::string_view to_string(EventKind kind);

struct Event {
  double timestamp = 0.0;
  EventKind kind = EventKind::CoordinateClamped;
  int subject = -1;  // person/track id, -1 when not applicable
  std::string detail;

  bool operator==(const Event&) const = default;
};

using EventLog = std::vector<Event>;

// ---------------------------------------------------------------------------
// Emotion labels
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNumPredefinedLabels = 4;
inline constexpr std::size_t kMaxLabelLength = 32;

enum class PredefinedLabel : std::uint8_t { Happiness = 0, Relaxation, Anger, Sadness };

/// Ordered set of active labels. The four predefined labels always occupy
/// indices 0..3; taught labels are appended in the order they first appear.
class LabelSet {
 public:
  LabelSet();

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<std::size_t> find(std::string_view name) const;

  /// Returns the index of `name`, appending it if new. Throws InvalidLabel
  /// for empty or over-long names.
  std::size_t intern(std::string_view name);

  static bool is_predefined(std::size_t index) { return index < kNumPredefinedLabels; }

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Canonicalizes label aliases ("joy" -> "happiness").
std::string canonical_label(std::string_view name);

}  // namespace kinaffect
