#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kinaffect/config.hpp"
#include "kinaffect/features.hpp"
#include "kinaffect/osc.hpp"
#include "kinaffect/recommenders.hpp"

namespace kinaffect {

enum class Mode : std::uint8_t { Major, Minor };

struct AudioParams {
  double tempo = 60.0;  // BPM
  Mode mode = Mode::Major;
  double complexity = 0.0;
  double dynamics = 0.0;

  bool operator==(const AudioParams&) const = default;
};

struct AudioMapping {
  double tempo_min = 60.0;
  double tempo_max = 140.0;
  double mode_deadband = 0.1;
  double dynamics_gamma = 0.7;

  static AudioMapping from(const EngineConfig& config);
};

/// Global audio parameters from the group estimate and group-mean normalized
/// features. Mode switches only once valence leaves [-deadband, deadband].
AudioParams map_audio(const EmotionEstimate& group, const NormalizedFeatures& group_features,
                      const AudioParams& previous, const AudioMapping& mapping);

struct VisualParams {
  int subject = 0;
  double hue = 0.0;  // degrees in [0, 360)
  double saturation = 0.0;
  double complexity = 0.0;
  double fluidity = 1.0;

  bool operator==(const VisualParams&) const = default;
};

VisualParams map_visuals(const EmotionEstimate& estimate, const NormalizedFeatures& features);

/// Hue angle of a circumplex point, degrees in [0, 360).
double hue_degrees(double valence, double arousal);

/// Per-person data published each hop.
struct PersonOutput {
  int id = 0;
  Point2 centroid;
  EmotionEstimate estimate;
  NormalizedFeatures features{};
  std::string top_label;
};

/// Builds the /cv/... packet set for one hop:
///   /cv/pose/<id> ff, /cv/emotion/<id> fffs, /cv/group/emotion f*K,
///   /cv/audio/{tempo,mode,complexity,dynamics},
///   /cv/visual/<id>/{hue,saturation,complexity,fluidity}.
/// With no persons only the four audio packets are produced.
std::vector<osc::Packet> build_packets(std::span<const PersonOutput> persons, const EmotionEstimate* group,
                                       const AudioParams& audio);

/// Builds the hop's packets and hands each to `sink`. Returns the packets.
std::vector<osc::Packet> publish(std::span<const PersonOutput> persons, const EmotionEstimate* group,
                                 const AudioParams& audio, osc::PacketSink& sink);

}  // namespace kinaffect
