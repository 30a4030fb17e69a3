#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kinaffect/config.hpp"
#include "kinaffect/core.hpp"

namespace kinaffect {

struct ServeOptions {
  std::string bind_address = "127.0.0.1";
  int ws_port = 8765;             // 0 picks a free port
  std::string osc_dest;           // empty disables OSC output
  std::size_t client_queue = 64;  // per-client outgoing messages, oldest dropped
  std::vector<PoseFrame> replay;  // optional frame source paced by timestamps
  double replay_speed = 1.0;
  bool handle_signals = false;    // stop on SIGINT / SIGTERM
};

/// WebSocket front end for one SessionEngine. All engine work runs on the
/// thread that calls run(); clients only ever see snapshot copies.
///
/// Client -> engine: {"cmd": ..., "label"?, "agree"?, "person"?, "t"?} or
/// {"frames": [recording records]}.
/// Engine -> client: {"type":"state", ...} after every hop and command,
/// {"type":"cosmos", ...} on Cosmos entry, {"type":"error", "message"}.
/// Unparseable or ill-formed messages get an error reply and the
/// connection is closed; rejected commands only get the error reply.
class Server {
 public:
  /// Binds immediately; throws BindError.
  Server(EngineConfig config, ServeOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const;
  void run();
  /// Thread-safe.
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace kinaffect
