#include "kinaffect/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

#include "kinaffect/core.hpp"

namespace kinaffect {

using nlohmann::json;

std::string_view feature_name(std::size_t index) {
  static constexpr std::string_view names[kNumFeatures] = {"speed",     "energy", "amplitude", "expansion",
                                                           "jerk",      "frequency", "qom",   "rom"};
  return index < kNumFeatures ? names[index] : std::string_view{"?"};
}

namespace {

[[noreturn]] void violation(std::string_view field, std::string_view why) {
  throw Error(ErrorKind::InvariantViolation, std::string(field) + ": " + std::string(why));
}

void require_positive(double v, std::string_view field) {
  if (!(std::isfinite(v) && v > 0.0)) violation(field, "must be positive");
}

void require_unit(double v, std::string_view field, bool allow_zero = true) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0 || (!allow_zero && v == 0.0))
    violation(field, allow_zero ? "must lie in [0,1]" : "must lie in (0,1]");
}

const char* const kLabelKeys[4] = {"happiness", "relaxation", "anger", "sadness"};

template <typename T>
void read_field(const json& patch, const char* key, T& target) {
  auto it = patch.find(key);
  if (it == patch.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ParseError, std::string("config field ") + key + " has the wrong type");
  }
}

}  // namespace

void validate(const EngineConfig& c) {
  require_unit(c.confidence_threshold, "confidence_threshold");
  require_unit(c.smoothing_alpha, "smoothing_alpha", false);
  if (c.max_gap_frames < 1) violation("max_gap_frames", "must be at least 1");
  if (c.max_persons < 1) violation("max_persons", "must be at least 1");
  require_positive(c.track_gate, "track_gate");
  require_positive(c.calibration_window_s, "calibration_window_s");
  if (!(c.coordinate_tolerance >= 0.0)) violation("coordinate_tolerance", "must be nonnegative");
  require_positive(c.window_s, "window_s");
  require_positive(c.hop_s, "hop_s");
  if (!(c.window_s > c.hop_s)) violation("window_s", "must exceed hop_s");
  require_positive(c.qom_threshold, "qom_threshold");
  require_positive(c.proximity_scale, "proximity_scale");
  if (!(c.frequency_deadband >= 0.0)) violation("frequency_deadband", "must be nonnegative");
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const Range& r = c.feature_ranges[i];
    if (!(std::isfinite(r.min) && std::isfinite(r.max) && r.min < r.max))
      violation("feature_ranges." + std::string(feature_name(i)), "min must be below max");
  }
  double wsum = 0.0;
  for (double w : c.recommender_weights) {
    if (!(std::isfinite(w) && w >= 0.0)) violation("recommender_weights", "weights must be nonnegative");
    wsum += w;
  }
  if (!(wsum > 0.0)) violation("recommender_weights", "weights must sum to a positive value");
  for (std::size_t i = 0; i < 4; ++i) {
    for (double v : c.anchors[i])
      if (!(std::isfinite(v) && v >= -1.0 && v <= 1.0))
        violation(std::string("anchors.") + kLabelKeys[i], "must lie in [-1,1]");
  }
  require_positive(c.circumplex_sigma, "circumplex_sigma");
  require_positive(c.sigma_floor, "sigma_floor");
  if (c.blend_full_windows < 1) violation("blend_full_windows", "must be at least 1");
  require_positive(c.ema_half_life_fast_s, "ema_half_life_fast_s");
  require_positive(c.ema_half_life_main_s, "ema_half_life_main_s");
  require_positive(c.ema_half_life_slow_s, "ema_half_life_slow_s");
  require_positive(c.trend_threshold, "trend_threshold");
  if (!(c.adaptation_rate >= 0.0 && c.adaptation_rate <= 1.0)) violation("adaptation_rate", "must lie in [0,1]");
  if (!(c.teach_lead_in_s >= 0.0)) violation("teach_lead_in_s", "must be nonnegative");
  require_positive(c.teach_min_segment_s, "teach_min_segment_s");
  require_positive(c.tempo_min, "tempo_range");
  if (!(c.tempo_min < c.tempo_max)) violation("tempo_range", "tempo_min must be below tempo_max");
  require_positive(c.mode_deadband, "mode_deadband");
  require_positive(c.dynamics_gamma, "dynamics_gamma");
  if (c.ws_port < 0 || c.ws_port > 65535) violation("ws_port", "must be a port number");
  require_unit(c.episode_min_confidence, "episode_min_confidence");
  require_positive(c.episode_min_duration_s, "episode_min_duration_s");
  require_positive(c.preparation_s, "preparation_s");
  require_positive(c.teaching_s, "teaching_s");
  require_positive(c.exploration_s, "exploration_s");
}

json to_json(const EngineConfig& c) {
  json ranges = json::object();
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    ranges[std::string(feature_name(i))] = {c.feature_ranges[i].min, c.feature_ranges[i].max};
  json anchors = json::object();
  for (std::size_t i = 0; i < 4; ++i) anchors[kLabelKeys[i]] = {c.anchors[i][0], c.anchors[i][1]};
  return {
      {"confidence_threshold", c.confidence_threshold},
      {"smoothing_alpha", c.smoothing_alpha},
      {"max_gap_frames", c.max_gap_frames},
      {"max_persons", c.max_persons},
      {"track_gate", c.track_gate},
      {"calibration_window_s", c.calibration_window_s},
      {"coordinate_tolerance", c.coordinate_tolerance},
      {"window_s", c.window_s},
      {"hop_s", c.hop_s},
      {"qom_threshold", c.qom_threshold},
      {"proximity_scale", c.proximity_scale},
      {"frequency_deadband", c.frequency_deadband},
      {"feature_ranges", ranges},
      {"recommender_weights", c.recommender_weights},
      {"anchors", anchors},
      {"circumplex_sigma", c.circumplex_sigma},
      {"sigma_floor", c.sigma_floor},
      {"blend_full_windows", c.blend_full_windows},
      {"ema_half_life_fast_s", c.ema_half_life_fast_s},
      {"ema_half_life_main_s", c.ema_half_life_main_s},
      {"ema_half_life_slow_s", c.ema_half_life_slow_s},
      {"trend_threshold", c.trend_threshold},
      {"adaptation_rate", c.adaptation_rate},
      {"teach_lead_in_s", c.teach_lead_in_s},
      {"teach_min_segment_s", c.teach_min_segment_s},
      {"tempo_range", {c.tempo_min, c.tempo_max}},
      {"mode_deadband", c.mode_deadband},
      {"dynamics_gamma", c.dynamics_gamma},
      {"osc_dest", c.osc_dest},
      {"ws_port", c.ws_port},
      {"episode_min_confidence", c.episode_min_confidence},
      {"episode_min_duration_s", c.episode_min_duration_s},
      {"cosmos_base_url", c.cosmos_base_url},
      {"preparation_s", c.preparation_s},
      {"teaching_s", c.teaching_s},
      {"exploration_s", c.exploration_s},
  };
}

void apply_patch(EngineConfig& c, const json& patch) {
  if (patch.is_null()) return;
  if (!patch.is_object()) throw Error(ErrorKind::ParseError, "config must be a JSON object");

  // Reject unknown keys up front so typos do not silently fall back to defaults.
  const json known = to_json(c);
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!known.contains(it.key())) throw Error(ErrorKind::ParseError, "unknown config field " + it.key());
  }

  read_field(patch, "confidence_threshold", c.confidence_threshold);
  read_field(patch, "smoothing_alpha", c.smoothing_alpha);
  read_field(patch, "max_gap_frames", c.max_gap_frames);
  read_field(patch, "max_persons", c.max_persons);
  read_field(patch, "track_gate", c.track_gate);
  read_field(patch, "calibration_window_s", c.calibration_window_s);
  read_field(patch, "coordinate_tolerance", c.coordinate_tolerance);
  read_field(patch, "window_s", c.window_s);
  read_field(patch, "hop_s", c.hop_s);
  read_field(patch, "qom_threshold", c.qom_threshold);
  read_field(patch, "proximity_scale", c.proximity_scale);
  read_field(patch, "frequency_deadband", c.frequency_deadband);
  read_field(patch, "recommender_weights", c.recommender_weights);
  read_field(patch, "circumplex_sigma", c.circumplex_sigma);
  read_field(patch, "sigma_floor", c.sigma_floor);
  read_field(patch, "blend_full_windows", c.blend_full_windows);
  read_field(patch, "ema_half_life_fast_s", c.ema_half_life_fast_s);
  read_field(patch, "ema_half_life_main_s", c.ema_half_life_main_s);
  read_field(patch, "ema_half_life_slow_s", c.ema_half_life_slow_s);
  read_field(patch, "trend_threshold", c.trend_threshold);
  read_field(patch, "adaptation_rate", c.adaptation_rate);
  read_field(patch, "teach_lead_in_s", c.teach_lead_in_s);
  read_field(patch, "teach_min_segment_s", c.teach_min_segment_s);
  read_field(patch, "mode_deadband", c.mode_deadband);
  read_field(patch, "dynamics_gamma", c.dynamics_gamma);
  read_field(patch, "osc_dest", c.osc_dest);
  read_field(patch, "ws_port", c.ws_port);
  read_field(patch, "episode_min_confidence", c.episode_min_confidence);
  read_field(patch, "episode_min_duration_s", c.episode_min_duration_s);
  read_field(patch, "cosmos_base_url", c.cosmos_base_url);
  read_field(patch, "preparation_s", c.preparation_s);
  read_field(patch, "teaching_s", c.teaching_s);
  read_field(patch, "exploration_s", c.exploration_s);

  if (auto it = patch.find("tempo_range"); it != patch.end()) {
    std::array<double, 2> r{};
    read_field(patch, "tempo_range", r);
    c.tempo_min = r[0];
    c.tempo_max = r[1];
  }
  if (auto it = patch.find("feature_ranges"); it != patch.end()) {
    if (!it->is_object()) throw Error(ErrorKind::ParseError, "feature_ranges must be an object");
    for (auto f = it->begin(); f != it->end(); ++f) {
      std::size_t i = 0;
      while (i < kNumFeatures && feature_name(i) != f.key()) ++i;
      if (i == kNumFeatures) throw Error(ErrorKind::ParseError, "unknown feature " + f.key());
      std::array<double, 2> r{};
      read_field(*it, f.key().c_str(), r);
      c.feature_ranges[i] = {r[0], r[1]};
    }
  }
  if (auto it = patch.find("anchors"); it != patch.end()) {
    if (!it->is_object()) throw Error(ErrorKind::ParseError, "anchors must be an object");
    for (auto a = it->begin(); a != it->end(); ++a) {
      std::size_t i = 0;
      while (i < 4 && a.key() != kLabelKeys[i]) ++i;
      if (i == 4) throw Error(ErrorKind::ParseError, "anchors only exist for predefined labels, got " + a.key());
      read_field(*it, a.key().c_str(), c.anchors[i]);
    }
  }
}

EngineConfig load_config(const std::filesystem::path& path, const json& overrides) {
  EngineConfig config;
  std::filesystem::path source = path;
  if (source.empty()) {
    if (const char* env = std::getenv("AFFECT_CONFIG"); env && *env) source = env;
  }
  if (!path.empty() && !std::filesystem::exists(path))
    throw Error(ErrorKind::ParseError, "config file not found: " + path.string());
  if (!source.empty() && std::filesystem::exists(source)) {
    std::ifstream in(source);
    if (!in) throw Error(ErrorKind::ParseError, "cannot read config " + source.string());
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, source.string() + ": " + e.what());
    }
    apply_patch(config, file);
  }
  apply_patch(config, overrides);
  validate(config);
  return config;
}

EngineConfig load_config(const std::filesystem::path& path) { return load_config(path, json::object()); }

std::string config_digest(const EngineConfig& config) {
  const std::string canonical = to_json(config).dump();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(canonical.data()), canonical.size(), digest);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xF]);
  }
  return out;
}

}  // namespace kinaffect
