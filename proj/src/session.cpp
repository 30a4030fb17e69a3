#include "kinaffect/session.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

#include "kinaffect/recording.hpp"

namespace kinaffect {

namespace {

constexpr double kTimeEps = 1e-9;

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

json distribution_json(const Distribution& p) { return json(p); }

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::Preparation: return "Preparation";
    case Phase::Teaching: return "Teaching";
    case Phase::Exploration: return "Exploration";
    case Phase::Cosmos: return "Cosmos";
  }
  return "?";
}

std::string_view to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::Start: return "start";
    case CommandKind::TeachStart: return "teach_start";
    case CommandKind::TeachEnd: return "teach_end";
    case CommandKind::Explore: return "explore";
    case CommandKind::Feedback: return "feedback";
    case CommandKind::End: return "end";
    case CommandKind::Abort: return "abort";
  }
  return "?";
}

std::optional<CommandKind> parse_command_kind(std::string_view name) {
  for (auto k : {CommandKind::Start, CommandKind::TeachStart, CommandKind::TeachEnd, CommandKind::Explore,
                 CommandKind::Feedback, CommandKind::End, CommandKind::Abort})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

Phase advance_phase(Phase current, PhaseTrigger trigger) {
  auto illegal = [&](std::string_view what) -> Phase {
    throw Error(ErrorKind::IllegalTransition, std::string(what) + " not allowed in " + std::string(to_string(current)));
  };
  if (trigger.kind == PhaseTrigger::Kind::Timeout) {
    switch (current) {
      case Phase::Preparation: return Phase::Teaching;
      case Phase::Teaching: return Phase::Exploration;
      case Phase::Exploration: return Phase::Cosmos;
      default: return illegal("timeout");
    }
  }
  const std::string name(to_string(trigger.command));
  switch (trigger.command) {
    case CommandKind::Abort: return Phase::Idle;
    case CommandKind::Start:
      if (current == Phase::Idle) return Phase::Preparation;
      return illegal(name);
    case CommandKind::TeachStart:
      if (current == Phase::Preparation || current == Phase::Teaching) return Phase::Teaching;
      return illegal(name);
    case CommandKind::TeachEnd:
      if (current == Phase::Teaching) return Phase::Teaching;
      throw Error(ErrorKind::WrongPhase, name + " requires Teaching");
    case CommandKind::Explore:
      if (current == Phase::Teaching) return Phase::Exploration;
      return illegal(name);
    case CommandKind::Feedback:
      if (current == Phase::Exploration) return Phase::Exploration;
      throw Error(ErrorKind::WrongPhase, name + " requires Exploration");
    case CommandKind::End:
      if (current == Phase::Exploration) return Phase::Cosmos;
      if (current == Phase::Cosmos) return Phase::Idle;
      return illegal(name);
  }
  return illegal(name);
}

std::optional<double> phase_duration(Phase phase, const EngineConfig& c) {
  switch (phase) {
    case Phase::Preparation: return c.preparation_s;
    case Phase::Teaching: return c.teaching_s;
    case Phase::Exploration: return c.exploration_s;
    default: return std::nullopt;
  }
}

SessionId make_session_id(double start_timestamp, std::string_view config_digest) {
  const std::string material = format_double(start_timestamp) + ":" + std::string(config_digest);
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(material.data()), material.size(), digest);
  SessionId id{};
  std::memcpy(id.data(), digest, id.size());
  return id;
}

// ---------------------------------------------------------------------------

SessionEngine::SessionEngine(EngineConfig config, osc::PacketSink* sink)
    : config_(std::move(config)),
      sink_(sink),
      feature_params_(FeatureParams::from(config_)),
      rec_params_(RecommenderParams::from(config_)),
      audio_mapping_(AudioMapping::from(config_)),
      config_digest_(config_digest(config_)),
      pipeline_(config_),
      validator_(config_.max_persons, config_.coordinate_tolerance),
      lexicon_(config_) {}

SessionEngine::~SessionEngine() = default;

void SessionEngine::add_recommender(std::unique_ptr<Recommender> recommender, double weight) {
  if (!(weight >= 0.0)) throw Error(ErrorKind::InvariantViolation, "recommender weight must be nonnegative");
  extra_.emplace_back(std::move(recommender), weight);
}

void SessionEngine::reset_session(double t) {
  session_start_ = t;
  session_id_ = make_session_id(t, config_digest_);
  phases_.clear();
  pipeline_.reset();
  validator_.reset();
  window_.clear();
  hop_origin_.reset();
  last_frame_t_.reset();
  next_hop_ = 1;
  hop_count_ = 0;
  lexicon_ = EmotionLexicon(config_);
  teach_snapshot_.reset();
  teach_label_.reset();
  memory_.clear();
  pending_feedback_.clear();
  audio_ = AudioParams{};
  history_.clear();
  feedback_.clear();
  events_.clear();
  last_hop_.reset();
  cosmos_.reset();
}

void SessionEngine::enter(Phase next, double t) {
  events_.push_back({t, EventKind::PhaseChanged, -1,
                     std::string(to_string(phase_)) + "->" + std::string(to_string(next))});
  phase_ = next;
  phase_entered_at_ = t;
  phases_.push_back({next, t});
  if (next == Phase::Cosmos) build_cosmos(t);
}

void SessionEngine::close_teach_segment(double t) {
  if (!teach_label_) return;
  const double trimmed = t - (teach_started_at_ + config_.teach_lead_in_s);
  if (trimmed + kTimeEps < config_.teach_min_segment_s) {
    const bool shrinks = teach_snapshot_ && teach_snapshot_->size() < lexicon_.size();
    if (teach_snapshot_) lexicon_ = std::move(*teach_snapshot_);
    // Temporal state may already span the discarded label.
    if (shrinks)
      for (auto& [id, m] : memory_) m.longitudinal.reset();
    events_.push_back({t, EventKind::TeachSegmentRejected, -1,
                       *teach_label_ + ": SegmentTooShort (" + format_double(std::max(trimmed, 0.0)) + " s)"});
  } else {
    events_.push_back({t, EventKind::TeachSegmentCommitted, -1,
                       *teach_label_ + " n=" + std::to_string(lexicon_.prototype(teach_index_).count)});
  }
  teach_snapshot_.reset();
  teach_label_.reset();
}

void SessionEngine::fire_timeouts(double t) {
  for (;;) {
    const auto d = phase_duration(phase_, config_);
    if (!d || t + kTimeEps < phase_entered_at_ + *d) return;
    const double at = phase_entered_at_ + *d;
    const Phase next = advance_phase(phase_, PhaseTrigger::timeout());
    if (phase_ == Phase::Teaching) close_teach_segment(at);
    enter(next, at);
  }
}

void SessionEngine::tick(double t) {
  clock_ = std::max(clock_, t);
  fire_timeouts(t);
}

void SessionEngine::finish(double t) {
  tick(t);
  while (phase_ == Phase::Preparation || phase_ == Phase::Teaching || phase_ == Phase::Exploration) {
    const Phase next = advance_phase(phase_, PhaseTrigger::timeout());
    if (phase_ == Phase::Teaching) close_teach_segment(t);
    enter(next, t);
  }
}

void SessionEngine::apply(const Command& cmd) {
  tick(cmd.timestamp);
  const double t = cmd.timestamp;
  const Phase next = advance_phase(phase_, PhaseTrigger::of(cmd.kind));

  switch (cmd.kind) {
    case CommandKind::Start:
      reset_session(t);
      enter(next, t);
      return;
    case CommandKind::TeachStart: {
      const std::string label = canonical_label(cmd.label);
      {
        LabelSet probe = lexicon_.labels();
        probe.intern(label);  // throws InvalidLabel before anything changes
      }
      close_teach_segment(t);
      EmotionLexicon snapshot = lexicon_;
      const std::size_t index = lexicon_.intern(label);
      if (next != phase_) enter(next, t);
      teach_snapshot_ = std::move(snapshot);
      teach_label_ = label;
      teach_index_ = index;
      teach_started_at_ = t;
      return;
    }
    case CommandKind::TeachEnd:
      close_teach_segment(t);
      return;
    case CommandKind::Explore:
      close_teach_segment(t);
      enter(next, t);
      return;
    case CommandKind::Feedback: {
      const bool agree = cmd.agree.value_or(true);
      feedback_.push_back({t, cmd.person, agree});
      pending_feedback_[cmd.person.value_or(-1)] = agree;
      return;
    }
    case CommandKind::End:
      enter(next, t);
      return;
    case CommandKind::Abort:
      teach_snapshot_.reset();
      teach_label_.reset();
      if (phase_ != Phase::Idle) enter(next, t);
      return;
  }
}

std::vector<HopResult> SessionEngine::on_raw_frame(const RawFrame& raw) {
  if (phase_ == Phase::Idle || phase_ == Phase::Cosmos) return {};
  return on_frame(validator_.validate(raw, &events_));
}

std::vector<HopResult> SessionEngine::on_frame(const PoseFrame& frame) {
  const double t = frame.timestamp;
  if (!std::isfinite(t) || (last_frame_t_ && !(t > *last_frame_t_)))
    throw Error(ErrorKind::NonMonotonicTimestamp, "frame timestamp " + format_double(t) + " not after previous");
  tick(t);
  if (phase_ == Phase::Idle || phase_ == Phase::Cosmos) return {};
  last_frame_t_ = t;

  window_.push_back(pipeline_.process(frame, &events_));
  while (!window_.empty() && window_.front().timestamp <= t - config_.window_s + kTimeEps) window_.pop_front();

  if (!hop_origin_) {
    hop_origin_ = t;
    return {};
  }
  if (t + kTimeEps < *hop_origin_ + static_cast<double>(next_hop_) * config_.hop_s) return {};
  next_hop_ = static_cast<std::uint64_t>(std::floor((t - *hop_origin_) / config_.hop_s + kTimeEps)) + 1;
  return {process_hop(t)};
}

HopResult SessionEngine::process_hop(double t) {
  HopResult r;
  r.hop = ++hop_count_;
  r.timestamp = t;
  r.phase = phase_;

  const std::vector<CleanFrame> window(window_.begin(), window_.end());
  const CleanFrame& latest = window.back();

  for (const CleanTrack& track : latest.tracks) {
    const auto fv = extract_features(window, track.track_id, feature_params_);
    if (!fv) continue;
    PersonHop ph;
    ph.track_id = track.track_id;
    ph.person_id = track.person_id;
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (const auto& kp : track.keypoints) {
      if (!kp.usable()) continue;
      sx += kp.x;
      sy += kp.y;
      ++n;
    }
    if (n > 0) ph.centroid = {sx / n, sy / n};
    ph.features = *fv;
    ph.normalized = normalize(*fv, config_.feature_ranges);
    r.persons.push_back(ph);
  }

  if (r.persons.empty()) {
    r.audio = audio_;
    r.packets = build_packets({}, nullptr, audio_);
    if (sink_ != nullptr)
      for (const auto& p : r.packets) sink_->send(p);
    last_hop_ = r;
    return r;
  }

  r.group_features = extract_group(window, feature_params_);
  const std::vector<Anchor> anchors = lexicon_.anchors();
  const std::size_t K = anchors.size();

  std::vector<EmotionEstimate> rec1;
  rec1.reserve(r.persons.size());
  for (const auto& ph : r.persons) {
    EmotionEstimate e = rec1_behavioral(ph.normalized, lexicon_, rec_params_);
    e.subject = ph.track_id;
    e.timestamp = t;
    rec1.push_back(std::move(e));
  }
  const std::vector<EmotionEstimate> rec2 = rec2_contextual(rec1, r.group_features, anchors);

  const std::size_t recent_cap =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config_.ema_half_life_fast_s / config_.hop_s)));

  for (std::size_t i = 0; i < r.persons.size(); ++i) {
    PersonHop& ph = r.persons[i];
    const std::uint32_t generation = latest.find(ph.track_id)->generation;
    auto [it, inserted] = memory_.try_emplace(ph.track_id);
    PersonMemory& m = it->second;
    if (inserted || m.generation != generation) {
      m.generation = generation;
      m.longitudinal = LongitudinalState::from(config_);
      m.recent.clear();
    }

    std::optional<Distribution> prior = m.longitudinal.prior();
    if (prior && prior->size() > K) {
      m.longitudinal.reset();
      prior.reset();
    }
    if (prior) prior->resize(K, 0.0);

    std::vector<std::optional<Distribution>> extra_out;
    extra_out.reserve(extra_.size());
    for (auto& [rec, w] : extra_) extra_out.push_back(rec->recommend(ph.track_id, t, ph.normalized, lexicon_));

    std::vector<WeightedRecommendation> inputs = {
        {&rec1[i].distribution, config_.recommender_weights[0]},
        {&rec2[i].distribution, config_.recommender_weights[1]},
        {prior ? &*prior : nullptr, config_.recommender_weights[2]},
    };
    for (std::size_t j = 0; j < extra_.size(); ++j)
      inputs.push_back({extra_out[j] ? &*extra_out[j] : nullptr, extra_[j].second});

    EmotionEstimate final = aggregate(inputs, anchors, rec1[i].intensity);
    final.subject = ph.track_id;
    final.timestamp = t;

    const auto shift = m.longitudinal.update(final.distribution, t);
    m.recent.push_back(ph.normalized);
    while (m.recent.size() > recent_cap) m.recent.pop_front();

    if (shift) {
      events_.push_back({t, EventKind::TrendShift, ph.track_id, "js=" + format_double(shift->divergence)});
      if (phase_ == Phase::Exploration) {
        std::optional<bool> fb;
        if (auto f = pending_feedback_.find(ph.track_id); f != pending_feedback_.end()) {
          fb = f->second;
          pending_feedback_.erase(f);
        } else if (auto g = pending_feedback_.find(-1); g != pending_feedback_.end()) {
          fb = g->second;
          pending_feedback_.erase(g);
        }
        NormalizedFeatures mean{};
        for (const auto& x : m.recent)
          for (std::size_t k = 0; k < kNumFeatures; ++k) mean[k] += x[k];
        for (auto& v : mean) v /= static_cast<double>(m.recent.size());
        const std::size_t top = final.top();
        if (adapt(lexicon_, top, mean, config_.adaptation_rate, fb))
          events_.push_back({t, EventKind::Adapted, ph.track_id, lexicon_.labels().name(top)});
        else
          events_.push_back({t, EventKind::AdaptationSuppressed, ph.track_id,
                             lexicon_.labels().name(top) + (fb == std::optional<bool>(false) ? ": disagree" : "")});
      }
    }
    ph.estimate = std::move(final);
  }

  if (phase_ == Phase::Teaching && teach_label_ &&
      t > teach_started_at_ + config_.teach_lead_in_s + kTimeEps) {
    for (const auto& ph : r.persons) lexicon_.accumulate(teach_index_, ph.normalized);
  }

  EmotionEstimate group;
  group.distribution.assign(K, 0.0);
  NormalizedFeatures mean_x{};
  const double np = static_cast<double>(r.persons.size());
  for (const auto& ph : r.persons) {
    for (std::size_t k = 0; k < K; ++k) group.distribution[k] += ph.estimate.distribution[k] / np;
    for (std::size_t k = 0; k < kNumFeatures; ++k) mean_x[k] += ph.normalized[k] / np;
    group.intensity += ph.estimate.intensity / np;
  }
  const Anchor va = weighted_anchor(group.distribution, anchors);
  group.valence = va.valence;
  group.arousal = va.arousal;
  group.confidence = distribution_confidence(group.distribution);
  group.subject = kGroupSubject;
  group.timestamp = t;
  r.group = group;

  audio_ = map_audio(group, mean_x, audio_, audio_mapping_);
  r.audio = audio_;

  std::vector<PersonOutput> outputs;
  outputs.reserve(r.persons.size());
  for (const auto& ph : r.persons)
    outputs.push_back({ph.track_id, ph.centroid, ph.estimate, ph.normalized,
                       lexicon_.labels().name(ph.estimate.top())});
  r.packets = build_packets(outputs, &group, audio_);
  if (sink_ != nullptr)
    for (const auto& p : r.packets) sink_->send(p);

  history_.push_back(r);
  last_hop_ = r;
  return r;
}

void SessionEngine::build_cosmos(double t) {
  CosmosInput in;
  in.session_id = session_id_;
  in.session_start = session_start_;
  in.session_end = t;
  in.labels = lexicon_.labels().names();
  in.thresholds = {config_.episode_min_confidence, config_.episode_min_duration_s, config_.hop_s};

  double speed = 0.0, qom = 0.0, max_rom = 0.0;
  std::size_t n = 0;
  for (const auto& h : history_) {
    if (!h.group) continue;
    HistoryPoint p;
    p.timestamp = h.timestamp;
    p.distribution = h.group->distribution;
    p.distribution.resize(in.labels.size(), 0.0);
    p.confidence = h.group->confidence;
    p.intensity = h.group->intensity;
    p.valence = h.group->valence;
    p.arousal = h.group->arousal;
    in.history.push_back(std::move(p));
    for (const auto& ph : h.persons) {
      speed += ph.features.speed;
      qom += ph.features.qom;
      max_rom = std::max(max_rom, ph.features.rom);
      ++n;
    }
  }
  if (n > 0) in.movement = {speed / static_cast<double>(n), qom / static_cast<double>(n), max_rom};
  cosmos_ = build_summary(in);
}

std::optional<std::string> SessionEngine::cosmos_payload() const {
  if (!cosmos_) return std::nullopt;
  return encode_payload(*cosmos_);
}

std::optional<std::string> SessionEngine::cosmos_url() const {
  if (!cosmos_) return std::nullopt;
  return kinaffect::cosmos_url(config_.cosmos_base_url, encode_payload(*cosmos_));
}

// ---------------------------------------------------------------------------
// JSON views
// ---------------------------------------------------------------------------

json to_json(const EmotionEstimate& e, const LabelSet& labels) {
  json j;
  j["dist"] = distribution_json(e.distribution);
  j["v"] = e.valence;
  j["a"] = e.arousal;
  j["intensity"] = e.intensity;
  j["confidence"] = e.confidence;
  if (!e.distribution.empty()) {
    const std::size_t top = e.top();
    j["top"] = top < labels.size() ? labels.name(top) : std::to_string(top);
  }
  return j;
}

json to_json(const FeatureVector& f) {
  const auto v = f.values();
  json j = json::object();
  for (std::size_t i = 0; i < kNumFeatures; ++i) j[std::string(feature_name(i))] = v[i];
  return j;
}

json to_json(const EventLog& events) {
  json arr = json::array();
  for (const auto& e : events) {
    json j{{"t", e.timestamp}, {"kind", std::string(to_string(e.kind))}};
    if (e.subject >= 0) j["subject"] = e.subject;
    if (!e.detail.empty()) j["detail"] = e.detail;
    arr.push_back(std::move(j));
  }
  return arr;
}

namespace {

json audio_json(const AudioParams& a) {
  return {{"tempo", a.tempo},
          {"mode", a.mode == Mode::Major ? "major" : "minor"},
          {"complexity", a.complexity},
          {"dynamics", a.dynamics}};
}

json hop_json(const HopResult& h, const LabelSet& labels) {
  json j;
  j["hop"] = h.hop;
  j["t"] = h.timestamp;
  j["phase"] = std::string(to_string(h.phase));
  json persons = json::array();
  for (const auto& p : h.persons) {
    persons.push_back({{"id", p.track_id},
                       {"person", p.person_id},
                       {"centroid", {p.centroid.x, p.centroid.y}},
                       {"features", to_json(p.features)},
                       {"emotion", to_json(p.estimate, labels)}});
  }
  j["persons"] = std::move(persons);
  j["group"] = h.group ? to_json(*h.group, labels) : json(nullptr);
  j["group_features"] = {{"count", h.group_features.count},
                         {"proximity", h.group_features.proximity},
                         {"synchrony", h.group_features.synchrony}};
  j["audio"] = audio_json(h.audio);
  return j;
}

json lexicon_json(const EmotionLexicon& lex) {
  json arr = json::array();
  for (std::size_t k = 0; k < lex.size(); ++k) {
    const Prototype& p = lex.prototype(k);
    std::vector<double> sd(kNumFeatures);
    for (std::size_t i = 0; i < kNumFeatures; ++i) sd[i] = p.spread(i, lex.sigma_floor());
    arr.push_back({{"label", lex.labels().name(k)},
                   {"count", p.count},
                   {"mean", p.mean},
                   {"sd", sd},
                   {"anchor", {p.anchor.valence, p.anchor.arousal}}});
  }
  return arr;
}

}  // namespace

json SessionEngine::report() const {
  json j;
  j["session_id"] = to_hex(session_id_);
  j["config_digest"] = config_digest_;
  j["session_start"] = session_start_;
  j["labels"] = lexicon_.labels().names();
  json phases = json::array();
  for (const auto& p : phases_) phases.push_back({{"phase", std::string(to_string(p.phase))}, {"t", p.timestamp}});
  j["phases"] = std::move(phases);
  json hist = json::array();
  for (const auto& h : history_) hist.push_back(hop_json(h, lexicon_.labels()));
  j["history"] = std::move(hist);
  j["lexicon"] = lexicon_json(lexicon_);
  json fb = json::array();
  for (const auto& f : feedback_) {
    json e{{"t", f.timestamp}, {"agree", f.agree}};
    e["person"] = f.person ? json(*f.person) : json(nullptr);
    fb.push_back(std::move(e));
  }
  j["feedback"] = std::move(fb);
  j["events"] = to_json(events_);
  if (cosmos_) {
    const std::string payload = encode_payload(*cosmos_);
    j["cosmos"] = {{"summary", to_json(*cosmos_)},
                   {"payload", payload},
                   {"url", kinaffect::cosmos_url(config_.cosmos_base_url, payload)}};
  } else {
    j["cosmos"] = nullptr;
  }
  return j;
}

json SessionEngine::state_message() const {
  json j;
  j["type"] = "state";
  j["hop"] = hop_count_;
  j["phase"] = std::string(to_string(phase_));
  j["t"] = clock_;
  j["teach_label"] = teach_label_ ? json(*teach_label_) : json(nullptr);
  j["labels"] = lexicon_.labels().names();
  json persons = json::array();
  if (last_hop_ && !window_.empty()) {
    const CleanFrame& latest = window_.back();
    for (const auto& p : last_hop_->persons) {
      json kp = json::array();
      if (const CleanTrack* tr = latest.find(p.track_id))
        for (const auto& k : tr->keypoints) kp.push_back({k.x, k.y, k.usable() ? 1 : 0});
      persons.push_back({{"id", p.track_id},
                         {"kp", std::move(kp)},
                         {"features", to_json(p.features)},
                         {"emotion", to_json(p.estimate, lexicon_.labels())}});
    }
  }
  j["persons"] = std::move(persons);
  j["group"] = last_hop_ && last_hop_->group ? to_json(*last_hop_->group, lexicon_.labels()) : json(nullptr);
  j["audio"] = audio_json(audio_);
  return j;
}

json SessionEngine::cosmos_message() const {
  if (!cosmos_) return nullptr;
  const std::string payload = encode_payload(*cosmos_);
  return {{"type", "cosmos"},
          {"url", kinaffect::cosmos_url(config_.cosmos_base_url, payload)},
          {"payload", payload},
          {"summary", to_json(*cosmos_)}};
}

}  // namespace kinaffect
