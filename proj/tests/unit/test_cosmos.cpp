#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kinaffect/cosmos.hpp"
#include "kinaffect/harness.hpp"

using namespace kinaffect;

namespace {

HistoryPoint point(double t, Distribution p, double intensity = 0.5) {
  HistoryPoint h;
  h.timestamp = t;
  h.confidence = distribution_confidence(p);
  h.distribution = std::move(p);
  h.intensity = intensity;
  h.valence = 0.7;
  h.arousal = 0.7;
  return h;
}

ErrorKind kind_of(std::string_view payload) {
  try {
    decode_payload(payload);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvariantViolation;
}

SessionId some_id(std::uint8_t seed) {
  SessionId id;
  for (std::size_t i = 0; i < id.size(); ++i) id[i] = static_cast<std::uint8_t>(seed * 31 + i * 7);
  return id;
}

}  // namespace

TEST_CASE("episode segmentation") {
  const EpisodeThresholds th;
  SUBCASE("ten seconds of one-hot happiness") {
    std::vector<HistoryPoint> h;
    for (int k = 0; k < 100; ++k) h.push_back(point(100.0 + k * 0.1, {1, 0, 0, 0}));
    const auto e = segment_episodes(h, 100.0, th);
    REQUIRE(e.size() == 1);
    CHECK(e[0].label == 0);
    CHECK(e[0].onset == doctest::Approx(0.0));
    CHECK(e[0].duration == doctest::Approx(10.0));
    CHECK(e[0].mean_intensity == doctest::Approx(0.5));
  }
  SUBCASE("alternating labels give nothing") {
    std::vector<HistoryPoint> h;
    for (int k = 0; k < 100; ++k) h.push_back(point(k * 0.1, k % 2 ? Distribution{1, 0, 0, 0} : Distribution{0, 1, 0, 0}));
    CHECK(segment_episodes(h, 0.0, th).empty());
  }
  SUBCASE("empty history") { CHECK(segment_episodes({}, 0.0, th).empty()); }
  SUBCASE("low confidence hops break a run") {
    std::vector<HistoryPoint> h;
    for (int k = 0; k < 100; ++k)
      h.push_back(point(k * 0.1, k == 50 ? Distribution{0.3, 0.24, 0.23, 0.23} : Distribution{1, 0, 0, 0}));
    const auto e = segment_episodes(h, 0.0, th);
    REQUIRE(e.size() == 2);
    CHECK(e[0].duration == doctest::Approx(5.0));
    CHECK(e[1].onset == doctest::Approx(5.1));
  }
  SUBCASE("idempotent and unaffected by trailing weak hops") {
    Rng rng(4);
    std::vector<HistoryPoint> h;
    int label = 0;
    for (int k = 0; k < 600; ++k) {
      if (rng.uniform() < 0.02) label = static_cast<int>(rng.uniform() * 4);
      Distribution p(4, 0.02);
      p[static_cast<std::size_t>(label)] = 0.94;
      h.push_back(point(k * 0.1, p, rng.uniform()));
    }
    const auto a = segment_episodes(h, 0.0, th);
    CHECK(segment_episodes(h, 0.0, th) == a);
    for (int k = 600; k < 650; ++k) h.push_back(point(k * 0.1, {0.25, 0.25, 0.25, 0.25}));
    CHECK(segment_episodes(h, 0.0, th) == a);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].duration >= 2.0 - 1e-9);
      CHECK(a[i].mean_confidence >= 0.4);
      if (i > 0) CHECK(a[i].onset >= a[i - 1].onset + a[i - 1].duration - 1e-9);
    }
  }
}

TEST_CASE("summary integrates levels") {
  CosmosInput in;
  in.session_id = some_id(1);
  in.session_start = 0.0;
  in.session_end = 100.0;
  in.labels = {"happiness", "relaxation", "anger", "sadness"};
  for (int k = 0; k < 1000; ++k) in.history.push_back(point(k * 0.1, {0.25, 0.25, 0.25, 0.25}));
  const auto s = build_summary(in);
  for (double v : s.integrated_levels) CHECK(v == doctest::Approx(25.0));
  CHECK(s.episodes.empty());
  CHECK(s.total_duration == 100.0);
}

TEST_CASE("crystals") {
  CHECK(crystal_size(0.5, std::numbers::e - 1.0) == doctest::Approx(0.5));
  CHECK(crystal_size(0.0, 10.0) == 0.0);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(), d = rng.uniform(0, 100);
    CHECK(crystal_size(a + 0.01, d) >= crystal_size(a, d));
    CHECK(crystal_size(a, d + 0.5) >= crystal_size(a, d));
  }
  const auto id = some_id(5);
  CHECK(crystal_position(id, 3) == crystal_position(id, 3));
  CHECK(crystal_position(id, 3) != crystal_position(id, 4));
  CHECK(crystal_position(id, 3) != crystal_position(some_id(6), 3));
  const auto c = make_crystal(id, 0, 0.5, 4.0, 12.0, 10.0);
  CHECK(c.rotation == doctest::Approx(std::numbers::pi));
  CHECK(c.creation_time == 12.0);
}

TEST_CASE("payload layout") {
  CosmosSummary s;
  s.session_id = some_id(9);
  s.total_duration = 123.45;
  s.labels = {"happiness", "relaxation", "anger", "sadness"};
  s.integrated_levels = {10.0, 20.0, 30.0, 7000.0};
  const auto header = encode_payload_bytes(s);
  REQUIRE(header.size() == 28);
  CHECK(header[0] == 1);
  CHECK(std::equal(s.session_id.begin(), s.session_id.end(), header.begin() + 1));
  CHECK((header[17] << 8 | header[18]) == 1235);  // deciseconds, rounded
  CHECK((header[19] << 8 | header[20]) == 100);
  CHECK((header[25] << 8 | header[26]) == 65535);  // saturated
  CHECK(header[27] == 0);

  EmotionEpisode e;
  e.label = 2;
  e.onset = 3.0;
  e.duration = 4.5;
  e.mean_intensity = 1.0;
  e.mean_valence = -1.0;
  e.mean_arousal = 0.0;
  s.episodes = {e};
  const auto one = encode_payload_bytes(s);
  REQUIRE(one.size() == 35);
  const std::vector<std::uint8_t> tail = {2, 0, 30, 0, 45, 255, 255};
  CHECK(std::equal(tail.begin(), tail.end(), one.begin() + 28));
}

TEST_CASE("episode cap keeps the most intense") {
  CosmosSummary s;
  s.session_id = some_id(2);
  for (int i = 0; i < 70; ++i) {
    EmotionEpisode e;
    e.onset = i * 3.0;
    e.duration = 2.0;
    e.mean_intensity = (i * 37 % 70) / 70.0;
    s.episodes.push_back(e);
  }
  const auto bytes = encode_payload_bytes(s);
  CHECK(bytes[27] == 64);
  const auto d = decode_payload(encode_payload(s));
  REQUIRE(d.episodes.size() == 64);
  for (const auto& e : d.episodes) CHECK(e.mean_intensity >= 6.0 / 70.0 - 1.0 / 255.0);
  for (std::size_t i = 1; i < d.episodes.size(); ++i) CHECK(d.episodes[i].onset > d.episodes[i - 1].onset);
}

TEST_CASE("payload errors") {
  CosmosSummary s;
  s.session_id = some_id(3);
  auto bytes = encode_payload_bytes(s);
  bytes[0] = 2;
  CHECK(kind_of(base64url_encode(bytes)) == ErrorKind::BadVersion);
  bytes[0] = 1;
  bytes.resize(20);
  CHECK(kind_of(base64url_encode(bytes)) == ErrorKind::BadLength);
  bytes = encode_payload_bytes(s);
  bytes[27] = 1;
  CHECK(kind_of(base64url_encode(bytes)) == ErrorKind::BadLength);
  CHECK(kind_of("not base64!") == ErrorKind::BadBase64);
  CHECK(kind_of("A") == ErrorKind::BadBase64);
  CHECK(kind_of("") == ErrorKind::BadLength);
}

TEST_CASE("base64url") {
  const std::vector<std::uint8_t> b = {0xFB, 0xFF, 0xBF, 0x00};
  CHECK(base64url_encode(b) == "-_-_AA");
  CHECK(base64url_decode("-_-_AA") == b);
  CHECK(base64url_encode(std::vector<std::uint8_t>{}).empty());
}

TEST_CASE("payload round trip within quantization") {
  Rng rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    CosmosSummary s;
    for (auto& b : s.session_id) b = static_cast<std::uint8_t>(rng.uniform() * 256);
    s.total_duration = rng.uniform(0, 900);
    s.labels = {"happiness", "relaxation", "anger", "sadness"};
    for (int k = 0; k < 4; ++k) s.integrated_levels.push_back(rng.uniform(0, 200));
    const int n = static_cast<int>(rng.uniform() * 65);
    double t = 0;
    for (int i = 0; i < n; ++i) {
      EmotionEpisode e;
      e.label = static_cast<std::size_t>(rng.uniform() * 4);
      e.onset = t;
      e.duration = rng.uniform(2, 10);
      t += e.duration + rng.uniform(0, 3);
      e.mean_intensity = rng.uniform();
      const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double r = rng.uniform(0.1, 1);
      e.mean_valence = r * std::cos(th);
      e.mean_arousal = r * std::sin(th);
      s.episodes.push_back(e);
    }
    const std::string payload = encode_payload(s);
    CHECK(payload.size() <= 1000);
    const auto d = decode_payload(payload);
    CHECK(d.session_id == s.session_id);
    CHECK(std::abs(d.total_duration - s.total_duration) <= 0.05 + 1e-9);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(d.integrated_levels[k] - s.integrated_levels[k]) <= 0.05 + 1e-9);
    REQUIRE(d.episodes.size() == s.episodes.size());
    REQUIRE(d.crystals.size() == s.episodes.size());
    for (std::size_t i = 0; i < s.episodes.size(); ++i) {
      const auto& a = s.episodes[i];
      const auto& b = d.episodes[i];
      CHECK(b.label == a.label);
      CHECK(std::abs(b.onset - a.onset) <= 0.05 + 1e-9);
      CHECK(std::abs(b.duration - a.duration) <= 0.05 + 1e-9);
      CHECK(std::abs(b.mean_intensity - a.mean_intensity) <= 1.0 / 255.0);
      const double ta = std::atan2(a.mean_arousal, a.mean_valence);
      const double tb = std::atan2(b.mean_arousal, b.mean_valence);
      double dt = std::abs(ta - tb);
      dt = std::min(dt, 2 * std::numbers::pi - dt);
      CHECK(dt <= std::numbers::pi / 255.0 + 1e-9);
      CHECK(d.crystals[i].position == crystal_position(s.session_id, i));
    }
  }
}

TEST_CASE("cosmos url") {
  CHECK(cosmos_url("https://x.org/", "abc") == "https://x.org/c#abc");
  CHECK(cosmos_url("https://x.org", "abc") == "https://x.org/c#abc");
}
