#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kinaffect/config.hpp"
#include "kinaffect/core.hpp"

using namespace kinaffect;
using json = nlohmann::json;

namespace {

constexpr std::size_t Speed = 0, Energy = 1, Jerk = 4;

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ParseError;
}

}  // namespace

TEST_CASE("no file and no overrides yields the defaults") {
  unsetenv("AFFECT_CONFIG");
  const EngineConfig c = load_config();
  CHECK(c == EngineConfig{});
  CHECK(c.window_s == 1.0);
  CHECK(c.hop_s == 0.1);
  CHECK(c.ws_port == 8765);
  CHECK(c.osc_dest == "127.0.0.1:9000");
}

TEST_CASE("file sets the tempo range") {
  const auto path = write_temp("kinaffect_tempo.json", R"({"tempo_range": [70, 130]})");
  const EngineConfig c = load_config(path);
  CHECK(c.tempo_min == 70.0);
  CHECK(c.tempo_max == 130.0);
  std::filesystem::remove(path);
}

TEST_CASE("window shorter than hop is an invariant violation naming window_s") {
  const auto path = write_temp("kinaffect_window.json", R"({"window_s": 0.05, "hop_s": 0.1})");
  try {
    load_config(path);
    FAIL("expected InvariantViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvariantViolation);
    CHECK(std::string(e.what()).rfind("window_s", 0) == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("overrides win over the file") {
  const auto path = write_temp("kinaffect_over.json", R"({"ws_port": 9001, "hop_s": 0.2})");
  const EngineConfig c = load_config(path, json{{"ws_port", 9100}});
  CHECK(c.ws_port == 9100);
  CHECK(c.hop_s == 0.2);
  std::filesystem::remove(path);
}

TEST_CASE("AFFECT_CONFIG names the file when no path is given") {
  const auto path = write_temp("kinaffect_env.json", R"({"max_persons": 2})");
  setenv("AFFECT_CONFIG", path.c_str(), 1);
  CHECK(load_config().max_persons == 2);
  unsetenv("AFFECT_CONFIG");
  std::filesystem::remove(path);
}

TEST_CASE("unknown keys, wrong types and missing files are parse errors") {
  EngineConfig c;
  CHECK(kind_of([&] { apply_patch(c, json{{"windw_s", 1.0}}); }) == ErrorKind::ParseError);
  CHECK(kind_of([&] { apply_patch(c, json{{"window_s", "long"}}); }) == ErrorKind::ParseError);
  CHECK(kind_of([&] { load_config("/nonexistent/kinaffect.json"); }) == ErrorKind::ParseError);
  const auto bad = write_temp("kinaffect_bad.json", "{not json");
  CHECK(kind_of([&] { load_config(bad); }) == ErrorKind::ParseError);
  std::filesystem::remove(bad);
}

TEST_CASE("nested fields patch individually") {
  EngineConfig c;
  apply_patch(c, json{{"feature_ranges", {{"speed", {0.0, 3.0}}}}, {"anchors", {{"anger", {-0.5, 0.9}}}}});
  CHECK(c.feature_ranges[Speed].max == 3.0);
  CHECK(c.feature_ranges[Energy] == EngineConfig{}.feature_ranges[Energy]);
  CHECK(c.anchors[2][0] == -0.5);
  CHECK(c.anchors[2][1] == 0.9);
}

TEST_CASE("json form round-trips") {
  EngineConfig c;
  c.hop_s = 0.05;
  c.tempo_min = 80;
  EngineConfig d;
  apply_patch(d, to_json(c));
  CHECK(c == d);
}

TEST_CASE("digest is stable and sensitive to every change") {
  const EngineConfig a;
  EngineConfig b;
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 64);
  b.trend_threshold = 0.16;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("default interactive phases each last between five and seven minutes") {
  const EngineConfig c;
  for (double d : {c.teaching_s, c.exploration_s}) {
    CHECK(d >= 5 * 60.0);
    CHECK(d <= 7 * 60.0);
  }
  CHECK(c.preparation_s < c.teaching_s);
}

TEST_CASE("validation rejects out-of-range values") {
  EngineConfig c;
  c.smoothing_alpha = 0.0;
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvariantViolation);
  c = {};
  c.recommender_weights = {0, 0, 0};
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvariantViolation);
  c = {};
  c.feature_ranges[Jerk] = {5.0, 5.0};
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::InvariantViolation);
  CHECK_NOTHROW(validate(EngineConfig{}));
}
