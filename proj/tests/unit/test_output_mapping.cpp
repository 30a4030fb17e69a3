#include <doctest.h>

#include <cmath>

#include "kinaffect/harness.hpp"
#include "kinaffect/output_mapping.hpp"

using namespace kinaffect;

namespace {

constexpr std::size_t kSpeed = 0, kJerk = 4, kQom = 6;

EmotionEstimate with_valence(double v) {
  EmotionEstimate e;
  e.distribution = {0.25, 0.25, 0.25, 0.25};
  e.valence = v;
  return e;
}

}  // namespace

TEST_CASE("tempo endpoints") {
  const AudioMapping m;
  NormalizedFeatures x{};
  CHECK(map_audio(with_valence(0), x, {}, m).tempo == 60.0);
  x[kSpeed] = 1.0;
  CHECK(map_audio(with_valence(0), x, {}, m).tempo == 140.0);
  x[kSpeed] = 0.5;
  CHECK(map_audio(with_valence(0), x, {}, m).tempo == 100.0);
}

TEST_CASE("mode hysteresis") {
  const AudioMapping m;
  const NormalizedFeatures x{};
  AudioParams a = map_audio(with_valence(0.2), x, {}, m);
  CHECK(a.mode == Mode::Major);
  a = map_audio(with_valence(-0.05), x, a, m);
  CHECK(a.mode == Mode::Major);
  a = map_audio(with_valence(-0.2), x, a, m);
  CHECK(a.mode == Mode::Minor);
  a = map_audio(with_valence(0.1), x, a, m);
  CHECK(a.mode == Mode::Minor);
}

TEST_CASE("mode never chatters inside the deadband") {
  const AudioMapping m;
  Rng rng(3);
  for (Mode start : {Mode::Major, Mode::Minor}) {
    AudioParams a;
    a.mode = start;
    for (int i = 0; i < 1000; ++i) {
      a = map_audio(with_valence(rng.uniform(-0.1, 0.1)), {}, a, m);
      CHECK(a.mode == start);
    }
  }
}

TEST_CASE("complexity and dynamics") {
  const AudioMapping m;
  NormalizedFeatures x{};
  x[kQom] = 0.3;
  EmotionEstimate e = with_valence(0);
  e.intensity = 0.5;
  const auto a = map_audio(e, x, {}, m);
  CHECK(a.complexity == doctest::Approx(0.3));
  CHECK(a.dynamics == doctest::Approx(std::pow(0.5, 0.7)));
}

TEST_CASE("audio mapping is monotone") {
  const AudioMapping m;
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    NormalizedFeatures lo{}, hi{};
    lo[kSpeed] = rng.uniform();
    hi[kSpeed] = lo[kSpeed] + rng.uniform() * (1 - lo[kSpeed]);
    EmotionEstimate a = with_valence(0), b = with_valence(0);
    a.intensity = rng.uniform();
    b.intensity = a.intensity + rng.uniform() * (1 - a.intensity);
    CHECK(map_audio(b, hi, {}, m).tempo >= map_audio(a, lo, {}, m).tempo);
    CHECK(map_audio(b, hi, {}, m).dynamics >= map_audio(a, lo, {}, m).dynamics);
  }
}

TEST_CASE("visual mapping") {
  CHECK(hue_degrees(1, 0) == doctest::Approx(0.0));
  CHECK(hue_degrees(0, 1) == doctest::Approx(90.0));
  CHECK(hue_degrees(-1, 0) == doctest::Approx(180.0));
  CHECK(hue_degrees(0, -1) == doctest::Approx(270.0));
  const double h = hue_degrees(1, -1e-18);
  CHECK(h >= 0.0);
  CHECK(h < 360.0);

  EmotionEstimate e;
  e.subject = 2;
  e.valence = 0.0;
  e.arousal = 1.0;
  e.intensity = 0.0;
  NormalizedFeatures x{};
  x[kSpeed] = 0.4;
  x[kJerk] = 0.25;
  const auto v = map_visuals(e, x);
  CHECK(v.subject == 2);
  CHECK(v.saturation == 0.0);
  CHECK(v.complexity == doctest::Approx(0.4));
  CHECK(v.fluidity == doctest::Approx(0.75));
}

TEST_CASE("packet schema") {
  PersonOutput p;
  p.id = 1;
  p.centroid = {0.4, 0.6};
  p.estimate.distribution = {0.7, 0.1, 0.1, 0.1};
  p.estimate.valence = 0.5;
  p.top_label = "happiness";
  EmotionEstimate group = p.estimate;
  const AudioParams audio;

  SUBCASE("one person") {
    osc::MemorySink sink;
    const std::vector<PersonOutput> persons = {p};
    const auto packets = publish(persons, &group, audio, sink);
    CHECK(packets.size() == 11);
    CHECK(sink.packets == packets);
    CHECK(packets[0].address == "/cv/pose/1");
    CHECK(packets[0].type_tags() == "ff");
    CHECK(packets[1].address == "/cv/emotion/1");
    CHECK(packets[1].type_tags() == "fffs");
    CHECK(packets[2].address == "/cv/group/emotion");
    CHECK(packets[2].type_tags() == "ffff");
    CHECK(packets[3].address == "/cv/audio/tempo");
    CHECK(packets[4].address == "/cv/audio/mode");
    CHECK(packets[4].type_tags() == "i");
    CHECK(packets[10].address == "/cv/visual/1/fluidity");
  }
  SUBCASE("no persons") {
    const auto packets = build_packets({}, &group, audio);
    REQUIRE(packets.size() == 4);
    for (const auto& pk : packets) CHECK(pk.address.rfind("/cv/audio/", 0) == 0);
  }
  SUBCASE("three persons") {
    std::vector<PersonOutput> persons = {p, p, p};
    persons[1].id = 2;
    persons[2].id = 3;
    CHECK(build_packets(persons, &group, audio).size() == 2 * 3 + 1 + 4 + 4 * 3);
  }
  SUBCASE("taught labels widen the group packet") {
    group.distribution = {0.2, 0.2, 0.2, 0.2, 0.2};
    const std::vector<PersonOutput> persons = {p};
    CHECK(build_packets(persons, &group, audio)[2].arguments.size() == 5);
  }
}
