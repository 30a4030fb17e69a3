#include "kinaffect/output_mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kinaffect {

AudioMapping AudioMapping::from(const EngineConfig& c) {
  return {c.tempo_min, c.tempo_max, c.mode_deadband, c.dynamics_gamma};
}

AudioParams map_audio(const EmotionEstimate& group, const NormalizedFeatures& features, const AudioParams& previous,
                      const AudioMapping& m) {
  AudioParams out;
  const double speed = std::clamp(features[static_cast<std::size_t>(Feature::Speed)], 0.0, 1.0);
  out.tempo = m.tempo_min + (m.tempo_max - m.tempo_min) * speed;
  if (group.valence > m.mode_deadband) out.mode = Mode::Major;
  else if (group.valence < -m.mode_deadband) out.mode = Mode::Minor;
  else out.mode = previous.mode;
  out.complexity = std::clamp(features[static_cast<std::size_t>(Feature::Qom)], 0.0, 1.0);
  out.dynamics = std::clamp(std::pow(std::clamp(group.intensity, 0.0, 1.0), m.dynamics_gamma), 0.0, 1.0);
  return out;
}

double hue_degrees(double valence, double arousal) {
  double deg = std::atan2(arousal, valence) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

VisualParams map_visuals(const EmotionEstimate& e, const NormalizedFeatures& x) {
  VisualParams v;
  v.subject = e.subject;
  v.hue = hue_degrees(e.valence, e.arousal);
  v.saturation = std::clamp(e.intensity, 0.0, 1.0);
  v.complexity = std::clamp(x[static_cast<std::size_t>(Feature::Speed)], 0.0, 1.0);
  v.fluidity = 1.0 - std::clamp(x[static_cast<std::size_t>(Feature::Jerk)], 0.0, 1.0);
  return v;
}

std::vector<osc::Packet> build_packets(std::span<const PersonOutput> persons, const EmotionEstimate* group,
                                       const AudioParams& audio) {
  std::vector<osc::Packet> out;
  auto f = [](double v) { return osc::Argument{static_cast<float>(v)}; };

  for (const auto& p : persons) {
    const std::string id = std::to_string(p.id);
    out.push_back({"/cv/pose/" + id, {f(p.centroid.x), f(p.centroid.y)}});
    out.push_back({"/cv/emotion/" + id,
                   {f(p.estimate.valence), f(p.estimate.arousal), f(p.estimate.intensity), osc::Argument{p.top_label}}});
  }
  if (!persons.empty() && group != nullptr) {
    osc::Packet g{"/cv/group/emotion", {}};
    for (double v : group->distribution) g.arguments.push_back(f(v));
    out.push_back(std::move(g));
  }
  out.push_back({"/cv/audio/tempo", {f(audio.tempo)}});
  out.push_back({"/cv/audio/mode", {osc::Argument{std::int32_t{audio.mode == Mode::Major ? 1 : 0}}}});
  out.push_back({"/cv/audio/complexity", {f(audio.complexity)}});
  out.push_back({"/cv/audio/dynamics", {f(audio.dynamics)}});
  for (const auto& p : persons) {
    const VisualParams v = map_visuals(p.estimate, p.features);
    const std::string base = "/cv/visual/" + std::to_string(p.id);
    out.push_back({base + "/hue", {f(v.hue)}});
    out.push_back({base + "/saturation", {f(v.saturation)}});
    out.push_back({base + "/complexity", {f(v.complexity)}});
    out.push_back({base + "/fluidity", {f(v.fluidity)}});
  }
  return out;
}

std::vector<osc::Packet> publish(std::span<const PersonOutput> persons, const EmotionEstimate* group,
                                 const AudioParams& audio, osc::PacketSink& sink) {
  auto packets = build_packets(persons, group, audio);
  for (const auto& p : packets) sink.send(p);
  return packets;
}

}  // namespace kinaffect
