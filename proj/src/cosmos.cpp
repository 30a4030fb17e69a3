#include "kinaffect/cosmos.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace kinaffect {

std::string to_hex(const SessionId& id) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : id) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xF]);
  }
  return out;
}

std::vector<EmotionEpisode> segment_episodes(std::span<const HistoryPoint> history, double session_start,
                                             const EpisodeThresholds& th) {
  std::vector<EmotionEpisode> out;
  std::size_t i = 0;
  while (i < history.size()) {
    if (history[i].confidence < th.min_confidence || history[i].distribution.empty()) {
      ++i;
      continue;
    }
    const std::size_t label = argmax(history[i].distribution);
    std::size_t j = i + 1;
    while (j < history.size() && history[j].confidence >= th.min_confidence && !history[j].distribution.empty() &&
           argmax(history[j].distribution) == label &&
           history[j].timestamp - history[j - 1].timestamp <= 1.5 * th.hop_s)
      ++j;

    const std::size_t n = j - i;
    const double duration = static_cast<double>(n) * th.hop_s;
    if (duration + 1e-9 >= th.min_duration_s) {
      EmotionEpisode e;
      e.label = label;
      e.onset = history[i].timestamp - session_start;
      e.duration = duration;
      for (std::size_t k = i; k < j; ++k) {
        e.mean_intensity += history[k].intensity;
        e.mean_valence += history[k].valence;
        e.mean_arousal += history[k].arousal;
        e.mean_confidence += history[k].confidence;
      }
      const double dn = static_cast<double>(n);
      e.mean_intensity /= dn;
      e.mean_valence /= dn;
      e.mean_arousal /= dn;
      e.mean_confidence /= dn;
      out.push_back(e);
    }
    i = j;
  }
  return out;
}

double crystal_size(double mean_intensity, double duration_s) {
  return std::max(0.0, mean_intensity) * std::log1p(std::max(0.0, duration_s));
}

std::array<double, 3> crystal_position(const SessionId& session_id, std::size_t index) {
  std::uint64_t seed = 0;
  for (std::size_t i = 0; i < session_id.size(); ++i) seed = (seed << 8 | seed >> 56) ^ session_id[i];
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  constexpr double golden_angle = 2.399963229728653;  // pi * (3 - sqrt(5))
  const double radius = 0.5 * std::sqrt(static_cast<double>(index) + 1.0);
  const double phase = 2.0 * std::numbers::pi * unit();
  const double angle = static_cast<double>(index) * golden_angle + 0.25 * phase;
  const double height = unit() - 0.5;
  return {radius * std::cos(angle), height, radius * std::sin(angle)};
}

Crystal make_crystal(const SessionId& session_id, std::size_t index, double mean_intensity, double duration_s,
                     double onset, double rotation) {
  Crystal c;
  c.size = crystal_size(mean_intensity, duration_s);
  c.creation_time = onset;
  c.rotation = std::clamp(rotation, -std::numbers::pi, std::numbers::pi);
  c.position = crystal_position(session_id, index);
  return c;
}

std::vector<EmotionEpisode> cap_episodes(std::vector<EmotionEpisode> episodes, std::size_t cap) {
  if (episodes.size() <= cap) return episodes;
  std::stable_sort(episodes.begin(), episodes.end(), [](const EmotionEpisode& a, const EmotionEpisode& b) {
    if (a.mean_intensity != b.mean_intensity) return a.mean_intensity > b.mean_intensity;
    return a.onset < b.onset;
  });
  episodes.resize(cap);
  std::stable_sort(episodes.begin(), episodes.end(),
                   [](const EmotionEpisode& a, const EmotionEpisode& b) { return a.onset < b.onset; });
  return episodes;
}

CosmosSummary build_summary(const CosmosInput& in) {
  CosmosSummary s;
  s.session_id = in.session_id;
  s.total_duration = std::max(0.0, in.session_end - in.session_start);
  s.labels = in.labels;
  s.integrated_levels.assign(in.labels.size(), 0.0);
  for (const auto& h : in.history)
    for (std::size_t k = 0; k < h.distribution.size() && k < s.integrated_levels.size(); ++k)
      s.integrated_levels[k] += h.distribution[k] * in.thresholds.hop_s;
  s.movement = in.movement;
  s.episodes = cap_episodes(segment_episodes(in.history, in.session_start, in.thresholds));
  for (std::size_t i = 0; i < s.episodes.size(); ++i) {
    const auto& e = s.episodes[i];
    s.crystals.push_back(make_crystal(s.session_id, i, e.mean_intensity, e.duration, e.onset,
                                      std::atan2(e.mean_arousal, e.mean_valence)));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Payload
// ---------------------------------------------------------------------------

namespace {

std::uint16_t deciseconds(double seconds) {
  const double ds = std::round(std::max(0.0, seconds) * 10.0);
  return static_cast<std::uint16_t>(std::min(ds, 65535.0));
}

std::uint8_t unit_byte(double v) { return static_cast<std::uint8_t>(std::round(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::uint8_t rotation_byte(double theta) {
  return unit_byte((std::clamp(theta, -std::numbers::pi, std::numbers::pi) + std::numbers::pi) /
                   (2.0 * std::numbers::pi));
}

double rotation_from_byte(std::uint8_t b) { return static_cast<double>(b) / 255.0 * 2.0 * std::numbers::pi - std::numbers::pi; }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

constexpr std::size_t kHeaderBytes = 1 + 16 + 2 + 8 + 1;
constexpr std::size_t kEpisodeBytes = 1 + 2 + 2 + 1 + 1;

const char* const kPredefinedNames[4] = {"happiness", "relaxation", "anger", "sadness"};

}  // namespace

std::vector<std::uint8_t> encode_payload_bytes(const CosmosSummary& s) {
  const std::vector<EmotionEpisode> episodes = cap_episodes(s.episodes);
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + kEpisodeBytes * episodes.size());
  out.push_back(kPayloadVersion);
  out.insert(out.end(), s.session_id.begin(), s.session_id.end());
  put_u16(out, deciseconds(s.total_duration));
  for (std::size_t k = 0; k < 4; ++k)
    put_u16(out, deciseconds(k < s.integrated_levels.size() ? s.integrated_levels[k] : 0.0));
  out.push_back(static_cast<std::uint8_t>(episodes.size()));
  for (const auto& e : episodes) {
    out.push_back(static_cast<std::uint8_t>(std::min<std::size_t>(e.label, 255)));
    put_u16(out, deciseconds(e.onset));
    put_u16(out, deciseconds(e.duration));
    out.push_back(unit_byte(e.mean_intensity));
    out.push_back(rotation_byte(std::atan2(e.mean_arousal, e.mean_valence)));
  }
  return out;
}

std::string encode_payload(const CosmosSummary& s) { return base64url_encode(encode_payload_bytes(s)); }

CosmosSummary decode_payload(std::string_view payload) {
  const std::vector<std::uint8_t> bytes = base64url_decode(payload);
  if (bytes.empty()) throw Error(ErrorKind::BadLength, "empty payload");
  if (bytes[0] != kPayloadVersion)
    throw Error(ErrorKind::BadVersion, "unsupported payload version " + std::to_string(bytes[0]));
  if (bytes.size() < kHeaderBytes)
    throw Error(ErrorKind::BadLength, "payload header needs " + std::to_string(kHeaderBytes) + " bytes, got " +
                                          std::to_string(bytes.size()));
  std::size_t pos = 1;
  auto u16 = [&] {
    const std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] << 8 | bytes[pos + 1]);
    pos += 2;
    return v;
  };

  CosmosSummary s;
  std::copy_n(bytes.begin() + 1, 16, s.session_id.begin());
  pos = 17;
  s.total_duration = u16() / 10.0;
  for (std::size_t k = 0; k < 4; ++k) {
    s.labels.emplace_back(kPredefinedNames[k]);
    s.integrated_levels.push_back(u16() / 10.0);
  }
  const std::size_t count = bytes[pos++];
  if (bytes.size() != kHeaderBytes + count * kEpisodeBytes)
    throw Error(ErrorKind::BadLength, "payload declares " + std::to_string(count) + " episodes but carries " +
                                          std::to_string(bytes.size()) + " bytes");
  for (std::size_t i = 0; i < count; ++i) {
    EmotionEpisode e;
    e.label = bytes[pos++];
    e.onset = u16() / 10.0;
    e.duration = u16() / 10.0;
    e.mean_intensity = bytes[pos++] / 255.0;
    const double theta = rotation_from_byte(bytes[pos++]);
    e.mean_valence = std::cos(theta);
    e.mean_arousal = std::sin(theta);
    while (e.label >= s.labels.size()) s.labels.push_back("label_" + std::to_string(s.labels.size()));
    s.crystals.push_back(make_crystal(s.session_id, i, e.mean_intensity, e.duration, e.onset, theta));
    s.episodes.push_back(e);
  }
  s.integrated_levels.resize(s.labels.size(), 0.0);
  return s;
}

std::string cosmos_url(std::string_view base, std::string_view payload) {
  std::string url(base);
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/c#";
  url += payload;
  return url;
}

std::string base64url_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  while (!out.empty() && out.back() == '=') out.pop_back();
  for (char& c : out) {
    if (c == '+') c = '-';
    else if (c == '/') c = '_';
  }
  return out;
}

std::vector<std::uint8_t> base64url_decode(std::string_view text) {
  std::string std64;
  std64.reserve(text.size() + 3);
  for (char c : text) {
    if (c == '-') std64.push_back('+');
    else if (c == '_') std64.push_back('/');
    else if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) std64.push_back(c);
    else throw Error(ErrorKind::BadBase64, std::string("invalid base64url character '") + c + "'");
  }
  if (std64.size() % 4 == 1) throw Error(ErrorKind::BadBase64, "base64url length is impossible");
  const std::size_t pad = (4 - std64.size() % 4) % 4;
  std64.append(pad, '=');
  std::vector<std::uint8_t> out(std64.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(std64.data()),
                                static_cast<int>(std64.size()));
  if (n < 0) throw Error(ErrorKind::BadBase64, "malformed base64url");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

nlohmann::json to_json(const CosmosSummary& s) {
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& e : s.episodes) {
    episodes.push_back({{"label", e.label < s.labels.size() ? s.labels[e.label] : std::to_string(e.label)},
                        {"label_index", e.label},
                        {"onset", e.onset},
                        {"duration", e.duration},
                        {"mean_intensity", e.mean_intensity},
                        {"mean_valence", e.mean_valence},
                        {"mean_arousal", e.mean_arousal}});
  }
  nlohmann::json crystals = nlohmann::json::array();
  for (const auto& c : s.crystals) {
    crystals.push_back({{"size", c.size},
                        {"creation_time", c.creation_time},
                        {"rotation", c.rotation},
                        {"position", c.position}});
  }
  nlohmann::json levels = nlohmann::json::object();
  for (std::size_t k = 0; k < s.labels.size() && k < s.integrated_levels.size(); ++k)
    levels[s.labels[k]] = s.integrated_levels[k];
  return {{"session_id", to_hex(s.session_id)},
          {"total_duration", s.total_duration},
          {"labels", s.labels},
          {"integrated_levels", levels},
          {"movement",
           {{"mean_speed", s.movement.mean_speed}, {"mean_qom", s.movement.mean_qom}, {"max_rom", s.movement.max_rom}}},
          {"episodes", episodes},
          {"crystals", crystals}};
}

}  // namespace kinaffect
