#include "kinaffect/core.hpp"

#include <algorithm>
#include <cctype>

namespace kinaffect {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorKind::WrongKeypointCount: return "WrongKeypointCount";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::InsufficientWindow: return "InsufficientWindow";
    case ErrorKind::LabelSetMismatch: return "LabelSetMismatch";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::SegmentTooShort: return "SegmentTooShort";
    case ErrorKind::IllegalTransition: return "IllegalTransition";
    case ErrorKind::WrongPhase: return "WrongPhase";
    case ErrorKind::UnsupportedType: return "UnsupportedType";
    case ErrorKind::MalformedPacket: return "MalformedPacket";
    case ErrorKind::SocketError: return "SocketError";
    case ErrorKind::BadVersion: return "BadVersion";
    case ErrorKind::BadLength: return "BadLength";
    case ErrorKind::BadBase64: return "BadBase64";
    case ErrorKind::BindError: return "BindError";
  }
  return "Unknown";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CoordinateClamped: return "coordinate_clamped";
    case EventKind::PersonDropped: return "person_dropped";
    case EventKind::KeypointStale: return "keypoint_stale";
    case EventKind::TrackOpened: return "track_opened";
    case EventKind::TrackRetired: return "track_retired";
    case EventKind::Calibrated: return "calibrated";
    case EventKind::PhaseChanged: return "phase_changed";
    case EventKind::TrendShift: return "trend_shift";
    case EventKind::Adapted: return "adapted";
    case EventKind::AdaptationSuppressed: return "adaptation_suppressed";
    case EventKind::TeachSegmentRejected: return "teach_segment_rejected";
    case EventKind::TeachSegmentCommitted: return "teach_segment_committed";
    case EventKind::SocketError: return "socket_error";
  }
  return "unknown";
}

std::string_view joint_name(std::size_t index) {
  static constexpr std::string_view names[kNumKeypoints] = {
      "nose",          "left_eye",       "right_eye",  "left_ear",    "right_ear",   "left_shoulder",
      "right_shoulder", "left_elbow",    "right_elbow", "left_wrist", "right_wrist", "left_hip",
      "right_hip",     "left_knee",      "right_knee", "left_ankle",  "right_ankle"};
  return index < kNumKeypoints ? names[index] : std::string_view{"?"};
}

LabelSet::LabelSet() : names_{"happiness", "relaxation", "anger", "sadness"} {}

std::optional<std::size_t> LabelSet::find(std::string_view name) const {
  const std::string canon = canonical_label(name);
  auto it = std::find(names_.begin(), names_.end(), canon);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t LabelSet::intern(std::string_view name) {
  const std::string canon = canonical_label(name);
  if (canon.empty()) throw Error(ErrorKind::InvalidLabel, "label must be nonempty");
  if (canon.size() > kMaxLabelLength)
    throw Error(ErrorKind::InvalidLabel, "label longer than 32 characters: " + canon);
  if (auto found = find(canon)) return *found;
  names_.push_back(canon);
  return names_.size() - 1;
}

std::string canonical_label(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  // strip surrounding whitespace
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  out.erase(out.begin(), std::find_if(out.begin(), out.end(), not_space));
  out.erase(std::find_if(out.rbegin(), out.rend(), not_space).base(), out.end());
  if (out == "joy") return "happiness";
  return out;
}

}  // namespace kinaffect
