#include "kinaffect/recording.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace kinaffect {

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

// Clamps a coordinate into [0,1]. Returns false when the value was too far
// outside the unit interval (or not finite) to be trusted.
bool clamp_coordinate(double& v, double tolerance, bool& clamped) {
  if (!std::isfinite(v)) {
    v = 0.0;
    return false;
  }
  if (v >= 0.0 && v <= 1.0) return true;
  const bool near = v >= -tolerance && v <= 1.0 + tolerance;
  v = std::clamp(v, 0.0, 1.0);
  clamped = true;
  return near;
}

}  // namespace

PoseFrame FrameValidator::validate(const RawFrame& raw, EventLog* events) {
  if (!std::isfinite(raw.timestamp))
    throw Error(ErrorKind::NonMonotonicTimestamp, "timestamp is not finite");
  if (last_timestamp_ && !(raw.timestamp > *last_timestamp_)) {
    throw Error(ErrorKind::NonMonotonicTimestamp,
                "timestamp " + std::to_string(raw.timestamp) + " does not follow " +
                    std::to_string(*last_timestamp_));
  }

  std::vector<const RawPerson*> order;
  order.reserve(raw.persons.size());
  for (const auto& p : raw.persons) {
    if (p.keypoints.size() != kNumKeypoints) {
      throw Error(ErrorKind::WrongKeypointCount, "person " + std::to_string(p.id) + " has " +
                                                     std::to_string(p.keypoints.size()) +
                                                     " keypoints, expected 17");
    }
    order.push_back(&p);
  }
  std::stable_sort(order.begin(), order.end(), [](const RawPerson* a, const RawPerson* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->id == order[i - 1]->id)
      throw Error(ErrorKind::ParseError, "duplicate person id " + std::to_string(order[i]->id));
  }

  PoseFrame frame;
  frame.timestamp = raw.timestamp;
  frame.source = raw.source;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const RawPerson& rp = *order[i];
    if (static_cast<int>(i) >= max_persons_) {
      if (events) events->push_back({raw.timestamp, EventKind::PersonDropped, rp.id, "over capacity"});
      continue;
    }
    PersonPose person;
    person.id = rp.id;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const auto& src = rp.keypoints[k];
      Keypoint& kp = person.keypoints[k];
      kp.x = src[0];
      kp.y = src[1];
      kp.confidence = std::isfinite(src[2]) ? std::clamp(src[2], 0.0, 1.0) : 0.0;
      bool clamped = false;
      const bool ok = clamp_coordinate(kp.x, tolerance_, clamped) & clamp_coordinate(kp.y, tolerance_, clamped);
      if (!ok) {
        kp.valid = false;
        kp.confidence = 0.0;
        if (events)
          events->push_back({raw.timestamp, EventKind::CoordinateClamped, rp.id,
                             std::string(joint_name(k)) + " rejected"});
      } else if (clamped && events) {
        events->push_back({raw.timestamp, EventKind::CoordinateClamped, rp.id, std::string(joint_name(k))});
      }
    }
    frame.persons.push_back(person);
  }
  last_timestamp_ = raw.timestamp;
  return frame;
}

PoseFrame validate_frame(const RawFrame& raw, std::optional<double> previous, int max_persons, EventLog* events) {
  FrameValidator v(max_persons);
  if (previous) {
    RawFrame primer;
    primer.timestamp = *previous;
    v.validate(primer);
  }
  return v.validate(raw, events);
}

RawFrame raw_frame_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw Error(ErrorKind::ParseError, "frame record must be an object");
  RawFrame raw;
  try {
    raw.timestamp = record.at("t").get<double>();
    for (const auto& p : record.at("persons")) {
      RawPerson person;
      person.id = p.at("id").get<int>();
      for (const auto& kp : p.at("kp")) {
        if (!kp.is_array() || kp.size() != 3) throw Error(ErrorKind::ParseError, "keypoint must be [x, y, conf]");
        person.keypoints.push_back({kp[0].get<double>(), kp[1].get<double>(), kp[2].get<double>()});
      }
      raw.persons.push_back(std::move(person));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return raw;
}

nlohmann::json frame_to_json(const PoseFrame& frame) {
  nlohmann::json persons = nlohmann::json::array();
  for (const auto& p : frame.persons) {
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& kp : p.keypoints) kps.push_back({kp.x, kp.y, kp.confidence});
    persons.push_back({{"id", p.id}, {"kp", std::move(kps)}});
  }
  return {{"t", frame.timestamp}, {"persons", std::move(persons)}};
}

std::string format_recording_line(const PoseFrame& frame) {
  std::string out;
  out.reserve(64 + frame.persons.size() * 17 * 40);
  out += "{\"t\": ";
  append_number(out, frame.timestamp);
  out += ", \"persons\": [";
  for (std::size_t i = 0; i < frame.persons.size(); ++i) {
    const auto& p = frame.persons[i];
    if (i) out += ", ";
    out += "{\"id\": ";
    out += std::to_string(p.id);
    out += ", \"kp\": [";
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const auto& kp = p.keypoints[k];
      if (k) out += ", ";
      out += '[';
      append_number(out, kp.x);
      out += ", ";
      append_number(out, kp.y);
      out += ", ";
      append_number(out, kp.confidence);
      out += ']';
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

RawFrame parse_recording_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  return raw_frame_from_json(j);
}

std::vector<PoseFrame> read_recording(std::istream& in, int max_persons, EventLog* events) {
  std::vector<PoseFrame> frames;
  FrameValidator validator(max_persons);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      RawFrame raw = parse_recording_line(line);
      frames.push_back(validator.validate(raw, events));
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError,
                  "line " + std::to_string(line_no) + ": " + std::string(to_string(e.kind())) + ": " + e.what());
    }
  }
  return frames;
}

std::vector<PoseFrame> read_recording_file(const std::string& path, int max_persons, EventLog* events) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open recording " + path);
  return read_recording(in, max_persons, events);
}

void write_recording(std::ostream& out, const std::vector<PoseFrame>& frames) {
  for (const auto& f : frames) out << format_recording_line(f) << '\n';
}

}  // namespace kinaffect
