#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace kinaffect {

inline constexpr std::size_t kNumFeatures = 8;

/// Feature order used by every normalized vector.
enum class Feature : std::uint8_t { Speed = 0, Energy, Amplitude, Expansion, Jerk, Frequency, Qom, Rom };

std::string_view feature_name(std::size_t index);

struct Range {
  double min = 0.0;
  double max = 1.0;

  bool operator==(const Range&) const = default;
};

struct EngineConfig {
  // pose pipeline
  double confidence_threshold = 0.3;
  double smoothing_alpha = 0.6;
  int max_gap_frames = 10;
  int max_persons = 3;
  double track_gate = 0.25;
  double calibration_window_s = 2.0;
  double coordinate_tolerance = 0.05;

  // windowing and features
  double window_s = 1.0;
  double hop_s = 0.1;
  double qom_threshold = 0.02;
  double proximity_scale = 0.5;
  double frequency_deadband = 0.05;  // body-lengths/s hysteresis for zero crossings
  std::array<Range, kNumFeatures> feature_ranges = {{
      {0.0, 2.5},    // speed, body-lengths/s
      {0.0, 12.0},   // energy, (body-lengths/s)^2
      {1.5, 5.0},    // amplitude
      {0.8, 2.6},    // expansion
      {0.0, 2500.0}, // jerk, body-lengths/s^3
      {0.0, 4.0},    // frequency, Hz
      {0.0, 1.0},    // qom
      {0.0, 0.6},    // rom
  }};

  // recommenders
  std::array<double, 3> recommender_weights = {0.4, 0.3, 0.3};
  std::array<std::array<double, 2>, 4> anchors = {{{0.7, 0.7}, {0.7, -0.7}, {-0.7, 0.7}, {-0.7, -0.7}}};
  double circumplex_sigma = 0.6;
  double sigma_floor = 0.05;
  int blend_full_windows = 100;
  double ema_half_life_fast_s = 1.0;
  double ema_half_life_main_s = 5.0;
  double ema_half_life_slow_s = 10.0;
  double trend_threshold = 0.15;
  double adaptation_rate = 0.05;
  double teach_lead_in_s = 1.0;
  double teach_min_segment_s = 3.0;

  // output mapping
  double tempo_min = 60.0;
  double tempo_max = 140.0;
  double mode_deadband = 0.1;
  double dynamics_gamma = 0.7;
  std::string osc_dest = "127.0.0.1:9000";
  int ws_port = 8765;

  // cosmos
  double episode_min_confidence = 0.4;
  double episode_min_duration_s = 2.0;
  std::string cosmos_base_url = "https://cosmos.example.org";

  // session
  double preparation_s = 60.0;
  double teaching_s = 300.0;
  double exploration_s = 300.0;

  bool operator==(const EngineConfig&) const = default;
};

/// Throws Error(InvariantViolation) naming the first offending field.
void validate(const EngineConfig& config);

nlohmann::json to_json(const EngineConfig& config);

/// Applies the fields present in `patch` on top of `config`. Unknown fields
/// and type mismatches throw Error(ParseError).
void apply_patch(EngineConfig& config, const nlohmann::json& patch);

/// Defaults, then the file at `path` (if non-empty and present, else the
/// path named by AFFECT_CONFIG), then `overrides`; the result is validated.
EngineConfig load_config(const std::filesystem::path& path, const nlohmann::json& overrides);
EngineConfig load_config(const std::filesystem::path& path = {});

/// Hex SHA-256 of the canonical JSON form.
std::string config_digest(const EngineConfig& config);

}  // namespace kinaffect
