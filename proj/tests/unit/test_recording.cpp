#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "kinaffect/recording.hpp"

using namespace kinaffect;
using testing::standing;

namespace {

RawPerson raw_person(int id, std::size_t count = kNumKeypoints) {
  RawPerson p;
  p.id = id;
  const Skeleton s = standing(0.5, 0.5);
  for (std::size_t k = 0; k < count; ++k) p.keypoints.push_back({s[k % kNumKeypoints].x, s[k % kNumKeypoints].y, 0.9});
  return p;
}

RawFrame raw_frame(double t, std::vector<RawPerson> persons) {
  RawFrame f;
  f.timestamp = t;
  f.persons = std::move(persons);
  return f;
}

}  // namespace

TEST_CASE("a well-formed frame after its predecessor is accepted") {
  FrameValidator v;
  CHECK_NOTHROW(v.validate(raw_frame(0.0, {raw_person(0)})));
  const PoseFrame f = v.validate(raw_frame(0.033, {raw_person(0)}));
  CHECK(f.timestamp == 0.033);
  REQUIRE(f.persons.size() == 1);
  CHECK(f.persons[0].keypoints[0].valid);
}

TEST_CASE("sixteen keypoints is a WrongKeypointCount") {
  FrameValidator v;
  try {
    v.validate(raw_frame(0.0, {raw_person(0, 16)}));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WrongKeypointCount);
  }
}

TEST_CASE("four persons keep the three lowest ids and drop one with an event") {
  FrameValidator v;
  EventLog events;
  const PoseFrame f = v.validate(raw_frame(0.0, {raw_person(7), raw_person(2), raw_person(5), raw_person(1)}), &events);
  REQUIRE(f.persons.size() == 3);
  CHECK(f.persons[0].id == 1);
  CHECK(f.persons[1].id == 2);
  CHECK(f.persons[2].id == 5);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == EventKind::PersonDropped);
  CHECK(events[0].subject == 7);
}

TEST_CASE("timestamps must strictly increase") {
  FrameValidator v;
  v.validate(raw_frame(1.0, {}));
  for (double t : {1.0, 0.5}) {
    try {
      v.validate(raw_frame(t, {}));
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonMonotonicTimestamp);
    }
  }
  CHECK(v.last_timestamp() == 1.0);
  CHECK_THROWS_AS(validate_frame(raw_frame(0.9, {}), 1.0), Error);
  CHECK_NOTHROW(validate_frame(raw_frame(1.1, {}), 1.0));
}

TEST_CASE("slightly out-of-range coordinates clamp, far ones invalidate") {
  RawPerson p = raw_person(0);
  p.keypoints[0] = {-0.03, 0.5, 0.9};
  p.keypoints[1] = {1.5, 0.5, 0.9};
  p.keypoints[2] = {0.5, std::nan(""), 0.9};
  p.keypoints[3] = {0.5, 0.5, 1.7};
  EventLog events;
  const PoseFrame f = validate_frame(raw_frame(0.0, {p}), std::nullopt, 3, &events);
  const auto& kp = f.persons[0].keypoints;
  CHECK(kp[0].x == 0.0);
  CHECK(kp[0].valid);
  CHECK(kp[1].x == 1.0);
  CHECK_FALSE(kp[1].valid);
  CHECK(kp[1].confidence == 0.0);
  CHECK_FALSE(kp[2].valid);
  CHECK(kp[3].confidence == 1.0);
  CHECK(events.size() == 3);
  for (const auto& e : events) CHECK(e.kind == EventKind::CoordinateClamped);
}

TEST_CASE("duplicate person ids are a parse error") {
  try {
    validate_frame(raw_frame(0.0, {raw_person(3), raw_person(3)}), std::nullopt);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
}

TEST_CASE("recording lines have a fixed shape and round-trip exactly") {
  FrameValidator v;
  PoseFrame f = v.validate(raw_frame(0.1, {raw_person(2)}));
  f.persons[0].keypoints[4].x = 0.123456789012345;
  const std::string line = format_recording_line(f);
  CHECK(line.rfind("{\"t\": 0.1, \"persons\": [{\"id\": 2, \"kp\": [[", 0) == 0);
  CHECK(line.find('\n') == std::string::npos);
  const RawFrame back = parse_recording_line(line);
  CHECK(back.timestamp == 0.1);
  REQUIRE(back.persons.size() == 1);
  CHECK(back.persons[0].keypoints[4][0] == 0.123456789012345);
  CHECK(nlohmann::json::parse(line) == frame_to_json(f));
}

TEST_CASE("write then read reproduces the frames") {
  std::vector<PoseFrame> frames;
  FrameValidator v;
  for (int i = 0; i < 5; ++i) frames.push_back(v.validate(raw_frame(i / 30.0, {raw_person(0), raw_person(1)})));
  std::stringstream ss;
  write_recording(ss, frames);
  const auto back = read_recording(ss);
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].timestamp == frames[i].timestamp);
    CHECK(back[i].persons[1].keypoints[9].y == frames[i].persons[1].keypoints[9].y);
  }
}

TEST_CASE("a corrupt line reports its line number") {
  std::vector<PoseFrame> frames;
  FrameValidator v;
  for (int i = 0; i < 20; ++i) frames.push_back(v.validate(raw_frame(i / 30.0, {raw_person(0)})));
  std::stringstream ss;
  write_recording(ss, frames);
  std::string text = ss.str();
  std::size_t pos = 0;
  for (int i = 0; i < 16; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos + 5, "garbage");
  std::istringstream in(text);
  try {
    read_recording(in);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).rfind("line 17:", 0) == 0);
  }
}

TEST_CASE("records with missing fields are parse errors") {
  for (const char* bad : {R"({"persons": []})", R"({"t": 0.0})", R"({"t": 0.0, "persons": [{"id": 0, "kp": [[0.1, 0.2]]}]})",
                          R"([1, 2])"}) {
    try {
      parse_recording_line(bad);
      FAIL("expected ParseError for " << bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ParseError);
    }
  }
}
