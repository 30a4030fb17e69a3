#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kinaffect/config.hpp"
#include "kinaffect/cosmos.hpp"
#include "kinaffect/features.hpp"
#include "kinaffect/osc.hpp"
#include "kinaffect/output_mapping.hpp"
#include "kinaffect/pose_pipeline.hpp"
#include "kinaffect/recommenders.hpp"
#include "kinaffect/recording.hpp"

namespace kinaffect {

enum class Phase : std::uint8_t { Idle, Preparation, Teaching, Exploration, Cosmos };

std::string_view to_string(Phase phase);

enum class CommandKind : std::uint8_t { Start, TeachStart, TeachEnd, Explore, Feedback, End, Abort };

std::string_view to_string(CommandKind kind);
std::optional<CommandKind> parse_command_kind(std::string_view name);

struct Command {
  double timestamp = 0.0;
  CommandKind kind = CommandKind::Start;
  std::string label;            // TeachStart
  std::optional<bool> agree;    // Feedback
  std::optional<int> person;    // Feedback
};

/// What moves the phase machine: an explicit command or the current
/// phase's configured duration running out.
struct PhaseTrigger {
  enum class Kind : std::uint8_t { Command, Timeout } kind = Kind::Command;
  CommandKind command = CommandKind::Start;

  static PhaseTrigger of(CommandKind c) { return {Kind::Command, c}; }
  static PhaseTrigger timeout() { return {Kind::Timeout, CommandKind::Start}; }
};

/// Pure transition function over the chain
/// Idle -> Preparation -> Teaching -> Exploration -> Cosmos -> Idle, plus
/// Abort to Idle from anywhere. TeachStart inside Teaching and TeachEnd /
/// Feedback are in-phase commands that leave the phase unchanged. Throws
/// IllegalTransition, or WrongPhase for an in-phase command in the wrong
/// phase.
Phase advance_phase(Phase current, PhaseTrigger trigger);

/// Configured duration of a timed phase; nullopt for Idle and Cosmos.
std::optional<double> phase_duration(Phase phase, const EngineConfig& config);

struct PersonHop {
  int track_id = 0;
  int person_id = 0;
  Point2 centroid;
  FeatureVector features;
  NormalizedFeatures normalized{};
  EmotionEstimate estimate;  // final consensus
};

struct HopResult {
  std::uint64_t hop = 0;
  double timestamp = 0.0;
  Phase phase = Phase::Idle;
  std::vector<PersonHop> persons;
  std::optional<EmotionEstimate> group;
  GroupFeatures group_features;
  AudioParams audio;
  std::vector<osc::Packet> packets;
};

struct FeedbackEntry {
  double timestamp = 0.0;
  std::optional<int> person;
  bool agree = true;
};

struct PhaseEntry {
  Phase phase = Phase::Idle;
  double timestamp = 0.0;
};

/// Single owner of all mutable session state. Frames and commands must be
/// delivered in timestamp order from one context.
class SessionEngine {
 public:
  explicit SessionEngine(EngineConfig config, osc::PacketSink* sink = nullptr);
  ~SessionEngine();

  SessionEngine(const SessionEngine&) = delete;
  SessionEngine& operator=(const SessionEngine&) = delete;

  /// Applies a command. Throws IllegalTransition / WrongPhase / InvalidLabel;
  /// the session is unchanged when it throws.
  void apply(const Command& command);

  /// Feeds one validated frame; fires phase timeouts first. Returns the hops
  /// processed (zero or one).
  std::vector<HopResult> on_frame(const PoseFrame& frame);

  /// Validates a raw adapter frame against the session's stream, then feeds
  /// it. Throws NonMonotonicTimestamp / WrongKeypointCount / ParseError.
  std::vector<HopResult> on_raw_frame(const RawFrame& raw);

  /// Fires phase timeouts up to `timestamp` without a frame.
  void tick(double timestamp);

  /// Walks the remaining chain to Cosmos at `timestamp` (no-op when Idle or
  /// already in Cosmos).
  void finish(double timestamp);

  /// Extra recommenders beyond the three built-ins; outputs are folded into
  /// the consensus with `weight`.
  void add_recommender(std::unique_ptr<Recommender> recommender, double weight);

  Phase phase() const { return phase_; }
  double phase_entered_at() const { return phase_entered_at_; }
  const SessionId& session_id() const { return session_id_; }
  const EmotionLexicon& lexicon() const { return lexicon_; }
  const std::vector<HopResult>& history() const { return history_; }
  const std::vector<FeedbackEntry>& feedback() const { return feedback_; }
  const EventLog& events() const { return events_; }
  const std::optional<std::string>& teach_label() const { return teach_label_; }
  std::uint64_t hop_count() const { return hop_count_; }
  const AudioParams& audio() const { return audio_; }
  const EngineConfig& config() const { return config_; }
  double clock() const { return clock_; }
  const std::optional<CosmosSummary>& cosmos() const { return cosmos_; }
  std::optional<std::string> cosmos_payload() const;
  std::optional<std::string> cosmos_url() const;

  /// Full session report (history, lexicon, feedback, events, cosmos).
  nlohmann::json report() const;

  /// Compact state snapshot for UI broadcasts.
  nlohmann::json state_message() const;

  /// {"type":"cosmos", "url", "payload", "summary"}; null before Cosmos.
  nlohmann::json cosmos_message() const;

 private:
  struct PersonMemory {
    std::uint32_t generation = 0;
    LongitudinalState longitudinal;
    std::deque<NormalizedFeatures> recent;
  };

  void enter(Phase next, double timestamp);
  void fire_timeouts(double timestamp);
  void close_teach_segment(double timestamp);
  void reset_session(double timestamp);
  HopResult process_hop(double timestamp);
  void build_cosmos(double timestamp);

  EngineConfig config_;
  osc::PacketSink* sink_;
  FeatureParams feature_params_;
  RecommenderParams rec_params_;
  AudioMapping audio_mapping_;
  std::string config_digest_;

  Phase phase_ = Phase::Idle;
  double phase_entered_at_ = 0.0;
  double clock_ = 0.0;
  double session_start_ = 0.0;
  SessionId session_id_{};
  std::vector<PhaseEntry> phases_;

  PosePipeline pipeline_;
  FrameValidator validator_;
  std::deque<CleanFrame> window_;
  std::optional<double> hop_origin_;
  std::optional<double> last_frame_t_;
  std::uint64_t next_hop_ = 1;
  std::uint64_t hop_count_ = 0;

  EmotionLexicon lexicon_;
  std::optional<EmotionLexicon> teach_snapshot_;
  std::optional<std::string> teach_label_;
  std::size_t teach_index_ = 0;
  double teach_started_at_ = 0.0;
  std::map<int, PersonMemory> memory_;
  std::map<int, bool> pending_feedback_;  // key -1: applies to any person

  std::vector<std::pair<std::unique_ptr<Recommender>, double>> extra_;

  AudioParams audio_;
  std::vector<HopResult> history_;
  std::vector<FeedbackEntry> feedback_;
  EventLog events_;
  std::optional<HopResult> last_hop_;
  std::optional<CosmosSummary> cosmos_;
};

SessionId make_session_id(double start_timestamp, std::string_view config_digest);

nlohmann::json to_json(const EmotionEstimate& estimate, const LabelSet& labels);
nlohmann::json to_json(const FeatureVector& features);
nlohmann::json to_json(const EventLog& events);

}  // namespace kinaffect
