#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kinaffect/core.hpp"

namespace kinaffect {

/// Validation of raw adapter output into PoseFrames. Holds the last accepted
/// timestamp so monotonicity can be enforced across a stream.
class FrameValidator {
 public:
  explicit FrameValidator(int max_persons = static_cast<int>(kDefaultMaxPersons),
                          double coordinate_tolerance = 0.05)
      : max_persons_(max_persons), tolerance_(coordinate_tolerance) {}

  /// Accepts or throws NonMonotonicTimestamp / WrongKeypointCount. Keypoints
  /// slightly outside [0,1] are clamped; keypoints far outside (or non-finite)
  /// are clamped and marked invalid. Overflow persons (highest ids first) are
  /// dropped. Both are reported through `events`.
  PoseFrame validate(const RawFrame& raw, EventLog* events = nullptr);

  void reset() { last_timestamp_.reset(); }
  std::optional<double> last_timestamp() const { return last_timestamp_; }

 private:
  int max_persons_;
  double tolerance_;
  std::optional<double> last_timestamp_;
};

/// Stateless convenience form; `previous` is the prior accepted timestamp.
PoseFrame validate_frame(const RawFrame& raw, std::optional<double> previous,
                         int max_persons = static_cast<int>(kDefaultMaxPersons),
                         EventLog* events = nullptr);

// Line-delimited recording format:
//   {"t": <float>, "persons": [{"id": <int>, "kp": [[x,y,conf] x 17]}]}

RawFrame raw_frame_from_json(const nlohmann::json& record);
nlohmann::json frame_to_json(const PoseFrame& frame);

/// Serializes one frame as a single recording line (no trailing newline).
std::string format_recording_line(const PoseFrame& frame);

/// Parses one recording line. Throws ParseError.
RawFrame parse_recording_line(std::string_view line);

/// Reads every non-empty line. Parse and validation errors are rethrown as
/// ParseError carrying the 1-based line number.
std::vector<PoseFrame> read_recording(std::istream& in, int max_persons = static_cast<int>(kDefaultMaxPersons),
                                      EventLog* events = nullptr);
std::vector<PoseFrame> read_recording_file(const std::string& path,
                                           int max_persons = static_cast<int>(kDefaultMaxPersons),
                                           EventLog* events = nullptr);

void write_recording(std::ostream& out, const std::vector<PoseFrame>& frames);

}  // namespace kinaffect
