// Thin module over the engine. Structured values cross the boundary as JSON
// text; the Python package turns them into dicts.

#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kinaffect/config.hpp"
#include "kinaffect/cosmos.hpp"
#include "kinaffect/harness.hpp"
#include "kinaffect/osc.hpp"
#include "kinaffect/recording.hpp"
#include "kinaffect/session.hpp"

namespace py = pybind11;
using json = nlohmann::json;
using namespace kinaffect;

namespace {

EngineConfig config_from(const std::string& text) {
  EngineConfig c;
  if (!text.empty()) apply_patch(c, json::parse(text));
  validate(c);
  return c;
}

std::vector<PoseFrame> frames_from(const std::string& recording, int max_persons) {
  std::istringstream in(recording);
  return read_recording(in, max_persons);
}

std::vector<Command> script_from(const std::string& text) {
  std::istringstream in(text);
  return parse_command_script(in);
}

class CapturingSink : public osc::PacketSink {
 public:
  void send(const osc::Packet& packet) override { packets.push_back(packet); }
  std::vector<osc::Packet> packets;
};

py::list to_py(const std::vector<osc::Argument>& args) {
  py::list out;
  for (const auto& a : args) {
    if (const auto* i = std::get_if<std::int32_t>(&a)) out.append(*i);
    else if (const auto* f = std::get_if<float>(&a)) out.append(static_cast<double>(*f));
    else if (const auto* s = std::get_if<std::string>(&a)) out.append(*s);
    else {
      const auto& b = std::get<osc::Blob>(a);
      out.append(py::bytes(reinterpret_cast<const char*>(b.data()), b.size()));
    }
  }
  return out;
}

osc::Packet packet_from(const std::string& address, const py::list& args) {
  osc::Packet p{address, {}};
  for (const auto& a : args) {
    if (py::isinstance<py::bool_>(a)) throw Error(ErrorKind::UnsupportedType, "bool is not an OSC argument");
    if (py::isinstance<py::int_>(a)) p.arguments.emplace_back(a.cast<std::int32_t>());
    else if (py::isinstance<py::float_>(a)) p.arguments.emplace_back(a.cast<float>());
    else if (py::isinstance<py::str>(a)) p.arguments.emplace_back(a.cast<std::string>());
    else if (py::isinstance<py::bytes>(a)) {
      const std::string raw = a.cast<std::string>();
      p.arguments.emplace_back(osc::Blob(raw.begin(), raw.end()));
    } else {
      throw Error(ErrorKind::UnsupportedType, "OSC arguments are int, float, str or bytes");
    }
  }
  return p;
}

class Session {
 public:
  explicit Session(const std::string& config) : engine_(config_from(config), &sink_) {}

  void apply(const std::string& command) { engine_.apply(command_from_json(json::parse(command), engine_.clock())); }

  /// One recording record; returns the state messages of the hops it closed.
  std::vector<std::string> push(const std::string& record) {
    std::vector<std::string> out;
    for (const auto& h : engine_.on_raw_frame(raw_frame_from_json(json::parse(record)))) {
      (void)h;
      out.push_back(engine_.state_message().dump());
    }
    return out;
  }

  void tick(double t) { engine_.tick(t); }
  void finish(double t) { engine_.finish(t); }
  std::string phase() const { return std::string(to_string(engine_.phase())); }
  std::uint64_t hop_count() const { return engine_.hop_count(); }
  std::string state() const { return engine_.state_message().dump(); }
  std::string report() const { return engine_.report().dump(); }
  std::optional<std::string> cosmos_url() const { return engine_.cosmos_url(); }

  py::list drain_packets() {
    py::list out;
    for (const auto& p : sink_.packets) out.append(py::make_tuple(p.address, to_py(p.arguments)));
    sink_.packets.clear();
    return out;
  }

 private:
  CapturingSink sink_;
  SessionEngine engine_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(std::string(to_string(e.kind())), e.what()).ptr());
    } catch (const json::exception& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple("ParseError", e.what()).ptr());
    }
  });

  m.def("default_config", [] { return to_json(EngineConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& c) { return to_json(config_from(c)).dump(); });
  m.def("config_digest", [](const std::string& c) { return config_digest(config_from(c)); });

  m.def(
      "synth",
      [](const std::string& archetype, double duration, int persons, std::uint64_t seed, double start_time) {
        const auto a = find_archetype(archetype);
        if (!a) throw Error(ErrorKind::InvalidLabel, "unknown archetype: " + archetype);
        SynthOptions o;
        o.duration_s = duration;
        o.persons = persons;
        o.seed = seed;
        o.start_time = start_time;
        std::ostringstream out;
        write_recording(out, synth(*a, o));
        return out.str();
      },
      py::arg("archetype"), py::arg("duration"), py::arg("persons"), py::arg("seed"), py::arg("start_time"));

  m.def("replay", [](const std::string& recording, const std::string& script, const std::string& config) {
    const EngineConfig c = config_from(config);
    return replay(frames_from(recording, c.max_persons), c, script_from(script)).dump();
  });

  m.def("run_eval", [](std::uint64_t seed, const std::string& config) {
    EvalOptions o;
    o.seed = seed;
    py::gil_scoped_release release;
    return to_json(run_eval(config_from(config), o)).dump();
  });

  m.def("osc_encode", [](const std::string& address, const py::list& args) {
    const auto bytes = osc::encode(packet_from(address, args));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("osc_decode", [](const py::bytes& data) {
    const std::string raw = data;
    const auto p = osc::decode(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
    return py::make_tuple(p.address, to_py(p.arguments));
  });

  m.def("cosmos_decode", [](const std::string& payload) { return to_json(decode_payload(payload)).dump(); });

  py::class_<Session>(m, "Session")
      .def(py::init<const std::string&>())
      .def("apply", &Session::apply)
      .def("push", &Session::push)
      .def("tick", &Session::tick)
      .def("finish", &Session::finish)
      .def_property_readonly("phase", &Session::phase)
      .def_property_readonly("hop_count", &Session::hop_count)
      .def("state", &Session::state)
      .def("report", &Session::report)
      .def("cosmos_url", &Session::cosmos_url)
      .def("drain_packets", &Session::drain_packets);
}
