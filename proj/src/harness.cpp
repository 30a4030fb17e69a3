#include "kinaffect/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <istream>
#include <numbers>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

namespace kinaffect {

namespace {

using json = nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double shaped(double s, double jerk) {
  const double e = 1.0 - 0.9 * std::clamp(jerk, 0.0, 1.0);
  return (s < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(s), e);
}

// 0 -> 1 -> 0 over one period of length 2.
double triangle(double u) {
  const double m = std::fmod(u, 2.0);
  return m <= 1.0 ? m : 2.0 - m;
}

struct Vec {
  double x, y;
};

// Neutral standing pose in body lengths, hip midpoint at the origin, y down.
// Index order follows Joint.
struct Posture {
  std::array<Vec, kNumKeypoints> at{};
};

struct PersonMotion {
  GestureArchetype a;
  double phase = 0.0;
  double crouch_phase = 0.0;
  double cx = 0.5;
  double cy = 0.55;
};

Posture pose_at(const PersonMotion& m, double t) {
  const GestureArchetype& a = m.a;
  const double phi = kTwoPi * a.frequency * t + m.phase;
  const double w = shaped(std::sin(phi), a.jerk);
  const double lift = -a.bounce * 0.5 * (w + 1.0);
  const double side = a.sway * std::sin(phi);
  const double c = a.crouch > 0.0 && a.drift > 0.0 ? a.crouch * triangle(a.drift * t / a.crouch + m.crouch_phase) : 0.0;

  Posture p;
  auto set = [&](Joint j, double x, double y) { p.at[idx(j)] = {x, y}; };

  const double hip_y = c;
  const double sh_y = -1.0 + c;
  const double sh_x = 0.4 * (1.0 - 0.35 * (a.crouch > 0.0 ? c / a.crouch : 0.0));
  const double head_y = -1.45 + 1.2 * c;
  set(Joint::Nose, 0.0, head_y);
  set(Joint::LeftEye, 0.08, head_y - 0.1);
  set(Joint::RightEye, -0.08, head_y - 0.1);
  set(Joint::LeftEar, 0.18, head_y - 0.05);
  set(Joint::RightEar, -0.18, head_y - 0.05);
  set(Joint::LeftShoulder, sh_x, sh_y);
  set(Joint::RightShoulder, -sh_x, sh_y);
  set(Joint::LeftHip, 0.25, hip_y);
  set(Joint::RightHip, -0.25, hip_y);
  set(Joint::LeftKnee, 0.27, 0.9 + 0.5 * c);
  set(Joint::RightKnee, -0.27, 0.9 + 0.5 * c);
  set(Joint::LeftAnkle, 0.25, 1.8);
  set(Joint::RightAnkle, -0.25, 1.8);

  const double theta = 2.0 * std::clamp(a.arm_spread, 0.0, 1.0);
  const double swing = a.arm_swing * w;
  for (int s : {1, -1}) {
    const Vec sh = p.at[idx(s > 0 ? Joint::LeftShoulder : Joint::RightShoulder)];
    const Vec el{sh.x + s * 0.55 * std::sin(theta), sh.y + 0.55 * std::cos(theta)};
    const double th2 = theta + swing;
    const Vec wr{el.x + s * 0.5 * std::sin(th2), el.y + 0.5 * std::cos(th2)};
    p.at[idx(s > 0 ? Joint::LeftElbow : Joint::RightElbow)] = el;
    p.at[idx(s > 0 ? Joint::LeftWrist : Joint::RightWrist)] = wr;
  }

  // Whole-body translation; ankles stay planted unless the body leaves the floor.
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    p.at[k].x += side;
    p.at[k].y += lift;
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  return r * std::cos(kTwoPi * u2);
}

void GestureArchetype::validate() const {
  auto fail = [&](const std::string& what) { throw Error(ErrorKind::InvariantViolation, label + ": " + what); };
  if (!(bounce >= 0.0 && bounce <= 1.5)) fail("bounce must lie in [0, 1.5] body lengths");
  if (!(sway >= 0.0 && sway <= 1.5)) fail("sway must lie in [0, 1.5] body lengths");
  if (!(arm_swing >= 0.0 && arm_swing <= 1.5)) fail("arm_swing must lie in [0, 1.5]");
  if (!(crouch >= 0.0 && crouch <= 1.5)) fail("crouch must lie in [0, 1.5] body lengths");
  if (!(frequency > 0.0 && frequency <= 5.0)) fail("frequency must lie in (0, 5] Hz");
  if (!(jerk >= 0.0 && jerk <= 1.0)) fail("jerk must lie in [0, 1]");
  if (!(arm_spread >= 0.0 && arm_spread <= 1.0)) fail("arm_spread must lie in [0, 1]");
  if (!(drift >= 0.0 && drift <= 2.0)) fail("drift must lie in [0, 2] body lengths/s");
  if (!(noise >= 0.0 && noise <= 0.2)) fail("noise must lie in [0, 0.2]");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
}

std::vector<GestureArchetype> default_archetypes() {
  std::vector<GestureArchetype> out(4);
  auto& happy = out[0];
  happy.label = "happiness";
  happy.bounce = 0.5;
  happy.frequency = 2.0;
  happy.arm_spread = 1.0;
  happy.arm_swing = 0.3;

  auto& relaxed = out[1];
  relaxed.label = "relaxation";
  relaxed.frequency = 0.5;
  relaxed.sway = 0.25;
  relaxed.bounce = 0.03;
  relaxed.arm_spread = 0.35;
  relaxed.arm_swing = 0.1;

  auto& angry = out[2];
  angry.label = "anger";
  angry.bounce = 0.3;
  angry.frequency = 3.0;
  angry.jerk = 0.9;
  angry.arm_spread = 0.45;
  angry.arm_swing = 0.6;

  auto& sad = out[3];
  sad.label = "sadness";
  sad.frequency = 0.3;
  sad.bounce = 0.02;
  sad.crouch = 0.5;
  sad.drift = 0.1;
  return out;
}

std::optional<GestureArchetype> find_archetype(std::string_view label) {
  const std::string canon = canonical_label(label);
  for (auto& a : default_archetypes())
    if (a.label == canon) return a;
  return std::nullopt;
}

std::vector<PoseFrame> synth(const GestureArchetype& archetype, const SynthOptions& o) {
  archetype.validate();
  if (o.persons < 0) throw Error(ErrorKind::InvariantViolation, "persons must be nonnegative");
  if (!(o.fps > 0.0)) throw Error(ErrorKind::InvariantViolation, "fps must be positive");
  Rng rng(o.seed);

  std::vector<PersonMotion> people;
  for (int i = 0; i < o.persons; ++i) {
    PersonMotion m;
    m.a = archetype;
    // Per-seed variation so fresh seeds give fresh (but same-family) streams.
    m.a.bounce *= rng.uniform(0.9, 1.1);
    m.a.frequency *= rng.uniform(0.9, 1.1);
    m.a.sway *= rng.uniform(0.9, 1.1);
    m.a.arm_swing *= rng.uniform(0.9, 1.1);
    m.a.drift *= rng.uniform(0.9, 1.1);
    m.phase = rng.uniform(0.0, kTwoPi);
    m.crouch_phase = rng.uniform(0.0, 2.0);
    m.cx = static_cast<double>(i + 1) / static_cast<double>(o.persons + 1);
    m.cy = 0.55;
    people.push_back(m);
  }

  const auto n = static_cast<long>(std::floor(o.duration_s * o.fps + 1e-9));
  std::vector<PoseFrame> frames;
  frames.reserve(static_cast<std::size_t>(std::max(0L, n)));
  const double L = o.body_length;
  for (long k = 0; k < n; ++k) {
    const double rel = static_cast<double>(k) / o.fps;
    PoseFrame f;
    f.timestamp = o.start_time + rel;
    f.source = FrameSource::Synthetic;
    for (int i = 0; i < o.persons; ++i) {
      const PersonMotion& m = people[static_cast<std::size_t>(i)];
      const Posture p = pose_at(m, rel);
      PersonPose person;
      person.id = i;
      for (std::size_t j = 0; j < kNumKeypoints; ++j) {
        Keypoint& kp = person.keypoints[j];
        kp.x = std::clamp(m.cx + L * (p.at[j].x + m.a.noise * rng.normal()), 0.0, 1.0);
        kp.y = std::clamp(m.cy + L * (p.at[j].y + m.a.noise * rng.normal()), 0.0, 1.0);
        kp.confidence = rng.uniform() < m.a.dropout ? 0.1 : rng.uniform(0.8, 1.0);
        kp.valid = true;
      }
      f.persons.push_back(person);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---------------------------------------------------------------------------

Command command_from_json(const json& j, double default_timestamp) {
  if (!j.is_object() || !j.contains("cmd") || !j["cmd"].is_string())
    throw Error(ErrorKind::ParseError, "command needs a string \"cmd\"");
  const auto kind = parse_command_kind(j["cmd"].get<std::string>());
  if (!kind) throw Error(ErrorKind::ParseError, "unknown command: " + j["cmd"].get<std::string>());
  Command c;
  c.kind = *kind;
  c.timestamp = default_timestamp;
  if (j.contains("t")) {
    if (!j["t"].is_number()) throw Error(ErrorKind::ParseError, "\"t\" must be a number");
    c.timestamp = j["t"].get<double>();
  }
  if (j.contains("label")) {
    if (!j["label"].is_string()) throw Error(ErrorKind::ParseError, "\"label\" must be a string");
    c.label = j["label"].get<std::string>();
  }
  if (c.kind == CommandKind::TeachStart && c.label.empty())
    throw Error(ErrorKind::ParseError, "teach_start needs a label");
  if (j.contains("agree")) {
    if (!j["agree"].is_boolean()) throw Error(ErrorKind::ParseError, "\"agree\" must be a boolean");
    c.agree = j["agree"].get<bool>();
  }
  if (j.contains("person") && !j["person"].is_null()) {
    if (!j["person"].is_number_integer()) throw Error(ErrorKind::ParseError, "\"person\" must be an integer");
    c.person = j["person"].get<int>();
  }
  return c;
}

std::vector<Command> parse_command_script(std::istream& in) {
  std::vector<Command> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.contains("t")) throw Error(ErrorKind::ParseError, "command needs \"t\"");
      out.push_back(command_from_json(j, 0.0));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Command& a, const Command& b) { return a.timestamp < b.timestamp; });
  return out;
}

void drive(SessionEngine& engine, const std::vector<PoseFrame>& frames, const std::vector<Command>& script,
           const ReplayOptions& options) {
  std::vector<Command> commands = script;
  const bool has_start = std::any_of(commands.begin(), commands.end(),
                                     [](const Command& c) { return c.kind == CommandKind::Start; });
  if (!has_start && !frames.empty()) {
    Command start;
    start.kind = CommandKind::Start;
    start.timestamp = frames.front().timestamp;
    commands.insert(commands.begin(), start);
  }
  std::stable_sort(commands.begin(), commands.end(),
                   [](const Command& a, const Command& b) { return a.timestamp < b.timestamp; });

  using clock = std::chrono::steady_clock;
  const auto wall0 = clock::now();
  const double t0 = frames.empty() ? 0.0 : frames.front().timestamp;
  auto pace = [&](double t) {
    if (!options.realtime || !(options.speed > 0.0)) return;
    const auto due = wall0 + std::chrono::duration_cast<clock::duration>(
                                 std::chrono::duration<double>((t - t0) / options.speed));
    std::this_thread::sleep_until(due);
  };

  std::size_t ci = 0;
  for (const PoseFrame& f : frames) {
    while (ci < commands.size() && commands[ci].timestamp <= f.timestamp) {
      pace(commands[ci].timestamp);
      engine.apply(commands[ci++]);
    }
    pace(f.timestamp);
    for (const auto& hop : engine.on_frame(f))
      if (options.on_hop) options.on_hop(hop);
  }
  for (; ci < commands.size(); ++ci) {
    pace(commands[ci].timestamp);
    engine.apply(commands[ci]);
  }
  const double end = std::max(frames.empty() ? 0.0 : frames.back().timestamp,
                              commands.empty() ? 0.0 : commands.back().timestamp);
  engine.finish(end);
}

json replay(const std::vector<PoseFrame>& frames, const EngineConfig& config, const std::vector<Command>& script,
            const ReplayOptions& options) {
  SessionEngine engine(config, options.sink);
  drive(engine, frames, script, options);
  return engine.report();
}

// ---------------------------------------------------------------------------

std::vector<HopSample> baseline_hops(const std::vector<PoseFrame>& frames, const EngineConfig& config) {
  EngineConfig c = config;
  c.preparation_s = 1e9;
  std::vector<HopSample> out;
  ReplayOptions opts;
  opts.on_hop = [&](const HopResult& h) {
    if (h.persons.empty()) return;
    out.push_back({h.timestamp, h.persons.front().features, h.persons.front().estimate});
  };
  SessionEngine engine(c);
  drive(engine, frames, {}, opts);
  return out;
}

EvalReport run_eval(const EngineConfig& config, const EvalOptions& o) {
  if (o.suite != "basic") throw Error(ErrorKind::InvariantViolation, "unknown eval suite: " + o.suite);
  const auto started = std::chrono::steady_clock::now();

  EngineConfig c = config;
  // The script drives every transition; keep timeouts out of the way.
  c.preparation_s = std::max(c.preparation_s, o.preparation_s + 1.0);
  c.teaching_s = 1e9;
  c.exploration_s = 1e9;

  const auto archetypes = default_archetypes();
  const std::size_t K = archetypes.size();
  std::vector<PoseFrame> frames;
  std::vector<Command> script;
  auto append = [&](const GestureArchetype& a, std::uint64_t seed, double start, double duration) {
    SynthOptions so;
    so.seed = seed;
    so.start_time = start;
    so.duration_s = duration;
    auto seg = synth(a, so);
    frames.insert(frames.end(), seg.begin(), seg.end());
  };

  double t = 0.0;
  script.push_back({t, CommandKind::Start, {}, {}, {}});
  append(archetypes[0], o.seed, t, o.preparation_s);
  t += o.preparation_s;
  for (std::size_t k = 0; k < K; ++k) {
    script.push_back({t, CommandKind::TeachStart, archetypes[k].label, {}, {}});
    append(archetypes[k], o.seed + k, t, o.teach_s);
    t += o.teach_s;
    script.push_back({t - 1e-6, CommandKind::TeachEnd, {}, {}, {}});
  }
  script.push_back({t - 5e-7, CommandKind::Explore, {}, {}, {}});
  std::vector<std::pair<double, double>> segments;  // per label: [start, end)
  for (std::size_t k = 0; k < K; ++k) {
    const std::uint64_t seed = o.explore_seeds ? o.explore_seeds->at(k) : o.seed + K + k;
    append(archetypes[k], seed, t, o.explore_s);
    segments.emplace_back(t, t + o.explore_s);
    t += o.explore_s;
  }

  EvalReport r;
  r.confusion.assign(K, std::vector<int>(K, 0));
  double conf_sum = 0.0;
  int conf_n = 0;
  ReplayOptions opts;
  SessionEngine engine(c);
  opts.on_hop = [&](const HopResult& h) {
    if (h.phase != Phase::Exploration || h.persons.empty()) return;
    for (std::size_t k = 0; k < K; ++k) {
      const auto [s, e] = segments[k];
      if (h.timestamp + 1e-9 < s + c.window_s || h.timestamp >= e) continue;
      const EmotionEstimate& est = h.persons.front().estimate;
      const std::size_t top = est.top();
      if (top < K) ++r.confusion[k][top];
      conf_sum += est.confidence;
      ++conf_n;
    }
  };
  drive(engine, frames, script, opts);

  r.labels.reserve(K);
  for (std::size_t k = 0; k < K; ++k) r.labels.push_back(archetypes[k].label);
  int correct = 0, total = 0;
  for (std::size_t k = 0; k < K; ++k) {
    int row = 0;
    for (int v : r.confusion[k]) row += v;
    r.windows.push_back(row);
    r.accuracy.push_back(row > 0 ? static_cast<double>(r.confusion[k][k]) / row : 0.0);
    correct += r.confusion[k][k];
    total += row;
  }
  r.overall_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  r.mean_confidence = conf_n > 0 ? conf_sum / conf_n : 0.0;
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

json to_json(const EvalReport& r) {
  json acc = json::object();
  json win = json::object();
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    acc[r.labels[k]] = r.accuracy[k];
    win[r.labels[k]] = r.windows[k];
  }
  return {{"labels", r.labels},         {"confusion", r.confusion},
          {"accuracy", acc},            {"windows", win},
          {"overall_accuracy", r.overall_accuracy}, {"mean_confidence", r.mean_confidence},
          {"runtime_s", r.runtime_s}};
}

}  // namespace kinaffect
