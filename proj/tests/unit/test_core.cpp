#include <doctest.h>

#include "kinaffect/core.hpp"

using namespace kinaffect;

TEST_CASE("predefined labels come first in a fixed order") {
  LabelSet labels;
  REQUIRE(labels.size() == kNumPredefinedLabels);
  CHECK(labels.name(0) == "happiness");
  CHECK(labels.name(1) == "relaxation");
  CHECK(labels.name(2) == "anger");
  CHECK(labels.name(3) == "sadness");
  for (std::size_t i = 0; i < 4; ++i) CHECK(LabelSet::is_predefined(i));
  CHECK_FALSE(LabelSet::is_predefined(4));
}

TEST_CASE("joy is an alias of happiness") {
  CHECK(canonical_label("Joy") == "happiness");
  CHECK(canonical_label("  SADNESS ") == "sadness");
  LabelSet labels;
  CHECK(labels.find("joy") == std::optional<std::size_t>(0));
  CHECK(labels.intern("joy") == 0);
  CHECK(labels.size() == 4);
}

TEST_CASE("interning a new label appends it") {
  LabelSet labels;
  CHECK(labels.intern("Wonder") == 4);
  CHECK(labels.name(4) == "wonder");
  CHECK(labels.intern("wonder") == 4);
}

TEST_CASE("empty and over-long labels are rejected") {
  LabelSet labels;
  CHECK_THROWS_AS(labels.intern("   "), Error);
  try {
    labels.intern(std::string(33, 'x'));
    FAIL("expected InvalidLabel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidLabel);
  }
  CHECK(labels.size() == 4);
  CHECK(labels.intern(std::string(32, 'x')) == 4);
}

TEST_CASE("keypoint layout follows COCO order") {
  CHECK(kNumKeypoints == 17);
  CHECK(idx(Joint::Nose) == 0);
  CHECK(idx(Joint::LeftShoulder) == 5);
  CHECK(idx(Joint::RightWrist) == 10);
  CHECK(idx(Joint::RightAnkle) == 16);
  CHECK(joint_name(0) == "nose");
  CHECK(joint_name(16) == "right_ankle");
}

TEST_CASE("error kinds have stable names") {
  CHECK(to_string(ErrorKind::WrongKeypointCount) == "WrongKeypointCount");
  CHECK(to_string(ErrorKind::IllegalTransition) == "IllegalTransition");
  CHECK(to_string(EventKind::PersonDropped) == "person_dropped");
}
