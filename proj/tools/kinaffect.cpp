// Command-line front end: serve, replay, synth, eval, cosmos decode.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kinaffect/config.hpp"
#include "kinaffect/cosmos.hpp"
#include "kinaffect/harness.hpp"
#include "kinaffect/osc.hpp"
#include "kinaffect/recording.hpp"
#include "kinaffect/serve.hpp"
#include "kinaffect/session.hpp"

namespace {

using json = nlohmann::json;
using namespace kinaffect;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBind = 3;

struct Globals {
  std::string config_path;
  std::optional<int> ws_port;
  std::optional<std::string> osc_dest;
  std::optional<std::string> cosmos_base_url;
};

EngineConfig make_config(const Globals& g) {
  json overrides = json::object();
  if (g.ws_port) overrides["ws_port"] = *g.ws_port;
  if (g.osc_dest) overrides["osc_dest"] = *g.osc_dest;
  if (g.cosmos_base_url) overrides["cosmos_base_url"] = *g.cosmos_base_url;
  return load_config(g.config_path, overrides);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  out << text << '\n';
}

std::vector<Command> read_script(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open command script " + path);
  return parse_command_script(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time movement-to-emotion engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (default: $AFFECT_CONFIG)");
  app.add_option("--ws-port", g.ws_port, "WebSocket port (default 8765)");
  app.add_option("--osc-dest", g.osc_dest, "OSC destination host:port (default 127.0.0.1:9000)");
  app.add_option("--cosmos-base-url", g.cosmos_base_url, "Base URL for cosmos links");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the WebSocket + OSC engine");
  std::string serve_replay;
  double serve_speed = 1.0;
  bool no_osc = false;
  serve->add_option("--replay", serve_replay, "Recording to feed as the frame source");
  serve->add_option("--speed", serve_speed, "Replay speed factor")->check(CLI::PositiveNumber);
  serve->add_flag("--no-osc", no_osc, "Disable OSC output");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Replay a recording through a full session");
  std::string recording, script_path, out_path;
  bool fast = false, realtime = false, send_osc = false;
  double replay_speed = 1.0;
  replay_cmd->add_option("recording", recording, "Line-delimited JSON recording")->required();
  replay_cmd->add_option("--script", script_path, "JSONL command script");
  replay_cmd->add_option("--out", out_path, "Session report path (default stdout)");
  auto* fast_flag = replay_cmd->add_flag("--fast", fast, "Process as fast as possible (default)");
  replay_cmd->add_flag("--realtime", realtime, "Pace by frame timestamps")->excludes(fast_flag);
  replay_cmd->add_option("--speed", replay_speed, "Pacing factor for --realtime")->check(CLI::PositiveNumber);
  replay_cmd->add_flag("--osc", send_osc, "Also send OSC to --osc-dest");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic recording");
  std::string archetype;
  int persons = 1;
  double duration = 10.0;
  std::uint64_t seed = 1;
  std::string synth_out;
  synth_cmd->add_option("archetype", archetype, "happiness | relaxation | anger | sadness")->required();
  synth_cmd->add_option("--persons", persons, "Number of persons")->check(CLI::Range(0, 16));
  synth_cmd->add_option("--duration", duration, "Seconds")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", seed, "RNG seed");
  synth_cmd->add_option("--out", synth_out, "Output path (default stdout)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run the teach-then-recognize evaluation");
  std::string suite = "basic";
  std::uint64_t eval_seed = 1;
  std::string eval_out;
  eval_cmd->add_option("--suite", suite, "Suite name")->check(CLI::IsMember({"basic"}));
  eval_cmd->add_option("--seed", eval_seed, "Base seed");
  eval_cmd->add_option("--out", eval_out, "Metrics path (default stdout)");

  // cosmos decode
  auto* cosmos_cmd = app.add_subcommand("cosmos", "Cosmos payload tools");
  cosmos_cmd->require_subcommand(1);
  auto* decode_cmd = cosmos_cmd->add_subcommand("decode", "Decode a payload or URL");
  std::string payload;
  decode_cmd->add_option("payload", payload, "Payload string or full URL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) {
      const auto a = find_archetype(archetype);
      if (!a) {
        std::cerr << "unknown archetype: " << archetype << '\n';
        return kExitUsage;
      }
      SynthOptions so;
      so.persons = persons;
      so.duration_s = duration;
      so.seed = seed;
      const auto frames = synth(*a, so);
      if (synth_out.empty() || synth_out == "-") {
        write_recording(std::cout, frames);
      } else {
        std::ofstream out(synth_out, std::ios::binary);
        if (!out) throw Error(ErrorKind::ParseError, "cannot write " + synth_out);
        write_recording(out, frames);
      }
      return kExitOk;
    }

    if (*replay_cmd) {
      const EngineConfig config = make_config(g);
      const auto frames = read_recording_file(recording, config.max_persons);
      const auto script = read_script(script_path);
      std::unique_ptr<osc::UdpSender> sender;
      if (send_osc) sender = std::make_unique<osc::UdpSender>(config.osc_dest);
      ReplayOptions ro;
      ro.realtime = realtime;
      ro.speed = replay_speed;
      ro.sink = sender.get();
      const json report = replay(frames, config, script, ro);
      if (sender) sender->flush();
      write_output(out_path, report.dump(2));
      return kExitOk;
    }

    if (*eval_cmd) {
      const EngineConfig config = make_config(g);
      EvalOptions eo;
      eo.suite = suite;
      eo.seed = eval_seed;
      const EvalReport r = run_eval(config, eo);
      write_output(eval_out, to_json(r).dump(2));
      return kExitOk;
    }

    if (*decode_cmd) {
      std::string text = payload;
      if (const auto hash = text.find('#'); hash != std::string::npos) text = text.substr(hash + 1);
      std::cout << to_json(decode_payload(text)).dump(2) << '\n';
      return kExitOk;
    }

    if (*serve) {
      const EngineConfig config = make_config(g);
      ServeOptions so;
      so.ws_port = config.ws_port;
      so.osc_dest = no_osc ? std::string{} : config.osc_dest;
      so.replay_speed = serve_speed;
      if (!serve_replay.empty()) so.replay = read_recording_file(serve_replay, config.max_persons);
      so.handle_signals = true;
      Server server(config, so);
      std::cerr << "listening on ws://" << so.bind_address << ':' << server.port() << '\n';
      server.run();
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::BindError ? kExitBind : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
