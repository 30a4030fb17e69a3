#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kinaffect/recommenders.hpp"

namespace kinaffect {

using SessionId = std::array<std::uint8_t, 16>;

std::string to_hex(const SessionId& id);

/// One hop of the group-level estimate history.
struct HistoryPoint {
  double timestamp = 0.0;
  Distribution distribution;
  double confidence = 0.0;
  double intensity = 0.0;
  double valence = 0.0;
  double arousal = 0.0;
};

struct EpisodeThresholds {
  double min_confidence = 0.4;
  double min_duration_s = 2.0;
  double hop_s = 0.1;
};

struct EmotionEpisode {
  std::size_t label = 0;
  double onset = 0.0;     // seconds from session start
  double duration = 0.0;  // seconds
  double mean_intensity = 0.0;
  double mean_valence = 0.0;
  double mean_arousal = 0.0;
  double mean_confidence = 0.0;

  bool operator==(const EmotionEpisode&) const = default;
};

/// Maximal runs of a constant top label with every hop at or above the
/// confidence threshold, kept when at least `min_duration_s` long. Each hop
/// covers `hop_s` seconds; a gap longer than 1.5 hops ends a run.
std::vector<EmotionEpisode> segment_episodes(std::span<const HistoryPoint> history, double session_start,
                                             const EpisodeThresholds& thresholds);

struct Crystal {
  double size = 0.0;
  double creation_time = 0.0;
  double rotation = 0.0;  // radians in [-pi, pi]
  std::array<double, 3> position{};

  bool operator==(const Crystal&) const = default;
};

/// size = intensity * ln(1 + duration)
double crystal_size(double mean_intensity, double duration_s);

/// Deterministic golden-angle spiral position for episode `index`.
std::array<double, 3> crystal_position(const SessionId& session_id, std::size_t index);

Crystal make_crystal(const SessionId& session_id, std::size_t index, double mean_intensity, double duration_s,
                     double onset, double rotation);

struct MovementTotals {
  double mean_speed = 0.0;  // body-lengths/s
  double mean_qom = 0.0;
  double max_rom = 0.0;

  bool operator==(const MovementTotals&) const = default;
};

inline constexpr std::size_t kMaxEpisodes = 64;

struct CosmosSummary {
  SessionId session_id{};
  double total_duration = 0.0;
  std::vector<std::string> labels;
  std::vector<double> integrated_levels;  // seconds, per label
  MovementTotals movement;
  std::vector<EmotionEpisode> episodes;  // time-ordered, at most kMaxEpisodes
  std::vector<Crystal> crystals;         // one per episode
};

/// Everything build_summary needs from a finished session.
struct CosmosInput {
  SessionId session_id{};
  double session_start = 0.0;
  double session_end = 0.0;
  std::vector<std::string> labels;
  std::vector<HistoryPoint> history;
  MovementTotals movement;
  EpisodeThresholds thresholds;
};

CosmosSummary build_summary(const CosmosInput& input);

/// Keeps the `cap` highest-intensity episodes (earlier onset wins ties),
/// returned in time order.
std::vector<EmotionEpisode> cap_episodes(std::vector<EmotionEpisode> episodes, std::size_t cap = kMaxEpisodes);

inline constexpr std::uint8_t kPayloadVersion = 1;

/// Versioned big-endian binary (see README for the layout), base64url
/// without padding. Out-of-range fields saturate.
std::vector<std::uint8_t> encode_payload_bytes(const CosmosSummary& summary);
std::string encode_payload(const CosmosSummary& summary);

/// Throws BadBase64, BadVersion or BadLength. Crystals are regenerated from
/// the session id; valence/arousal survive only as the rotation direction.
CosmosSummary decode_payload(std::string_view payload);

std::string cosmos_url(std::string_view base, std::string_view payload);

std::string base64url_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64url_decode(std::string_view text);

nlohmann::json to_json(const CosmosSummary& summary);

}  // namespace kinaffect
