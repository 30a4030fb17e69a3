#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kinaffect/config.hpp"
#include "kinaffect/core.hpp"
#include "kinaffect/osc.hpp"
#include "kinaffect/session.hpp"

namespace kinaffect {

/// Deterministic RNG helpers built on raw mt19937_64 output so streams are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();   // standard normal, Box-Muller

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Parameters of the procedural skeleton animator. Lengths are in body
/// lengths (torso length).
struct GestureArchetype {
  std::string label;
  double bounce = 0.0;      // vertical oscillation amplitude
  double frequency = 1.0;   // Hz
  double jerk = 0.0;        // 0 smooth sine .. 1 near square wave
  double arm_spread = 0.0;  // 0 arms at sides .. 1 outstretched
  double arm_swing = 0.0;   // wrist oscillation amplitude
  double sway = 0.0;        // lateral oscillation amplitude
  double crouch = 0.0;      // peak crouch depth
  double drift = 0.0;       // crouch rate, body-lengths/s (triangle wave)
  double noise = 0.01;      // keypoint jitter sd
  double dropout = 0.01;    // per-keypoint chance of a low-confidence frame

  /// Throws InvariantViolation outside the plausibility bounds.
  void validate() const;
};

/// The four default archetypes in predefined-label order.
std::vector<GestureArchetype> default_archetypes();
std::optional<GestureArchetype> find_archetype(std::string_view label);

struct SynthOptions {
  int persons = 1;
  double duration_s = 10.0;
  std::uint64_t seed = 1;
  double start_time = 0.0;
  double fps = 30.0;
  double body_length = 0.2;  // torso length in image units
};

std::vector<PoseFrame> synth(const GestureArchetype& archetype, const SynthOptions& options);

/// Reads a JSONL command script: {"t": s, "cmd": name, "label"?, "agree"?, "person"?}.
std::vector<Command> parse_command_script(std::istream& in);
Command command_from_json(const nlohmann::json& j, double default_timestamp);

struct ReplayOptions {
  bool realtime = false;
  double speed = 1.0;
  osc::PacketSink* sink = nullptr;
  std::function<void(const HopResult&)> on_hop;
};

/// Drives a session over `frames` and `script` merged by timestamp
/// (commands first on ties). Inserts a start at the first frame when the
/// script has none, and finishes the session to Cosmos at the last frame.
nlohmann::json replay(const std::vector<PoseFrame>& frames, const EngineConfig& config,
                      const std::vector<Command>& script = {}, const ReplayOptions& options = {});

/// Same as replay() but leaves the engine for inspection.
void drive(SessionEngine& engine, const std::vector<PoseFrame>& frames, const std::vector<Command>& script,
           const ReplayOptions& options = {});

struct EvalOptions {
  std::string suite = "basic";
  std::uint64_t seed = 1;
  double preparation_s = 2.0;
  double teach_s = 20.0;
  double explore_s = 20.0;
  /// When set, exploration reuses these seeds instead of seed+4..seed+7.
  std::optional<std::vector<std::uint64_t>> explore_seeds;
};

struct EvalReport {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> confusion;  // rows: true label, columns: predicted
  std::vector<double> accuracy;             // per label
  std::vector<int> windows;                 // per label
  double mean_confidence = 0.0;
  double overall_accuracy = 0.0;
  double runtime_s = 0.0;
};

/// Throws InvariantViolation for an unknown suite.
EvalReport run_eval(const EngineConfig& config, const EvalOptions& options = {});
nlohmann::json to_json(const EvalReport& report);

/// Per-hop raw features of the first tracked person when `frames` run
/// through the pipeline without teaching (empty lexicon).
struct HopSample {
  double timestamp = 0.0;
  FeatureVector features;
  EmotionEstimate estimate;
};
std::vector<HopSample> baseline_hops(const std::vector<PoseFrame>& frames, const EngineConfig& config);

}  // namespace kinaffect
