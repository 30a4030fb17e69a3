#include "kinaffect/serve.hpp"

#include <chrono>
#include <deque>
#include <set>
#include <string>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "kinaffect/harness.hpp"
#include "kinaffect/osc.hpp"
#include "kinaffect/recording.hpp"
#include "kinaffect/session.hpp"

namespace kinaffect {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

namespace {

class Client;

json error_message(const std::string& text) { return {{"type", "error"}, {"message", text}}; }

}  // namespace

struct Server::Impl {
  Impl(EngineConfig config, ServeOptions opts);

  void accept();
  void join(const std::shared_ptr<Client>& c);
  void leave(Client* c);
  void handle(const std::shared_ptr<Client>& c, const std::string& text);
  void broadcast(const json& message);
  void after_engine_step(Phase before);
  void schedule_replay();

  ServeOptions options;
  asio::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::unique_ptr<osc::UdpSender> osc;
  std::unique_ptr<SessionEngine> engine;
  std::set<std::shared_ptr<Client>> clients;
  asio::steady_timer replay_timer{ioc};
  asio::signal_set signals{ioc};
  std::size_t replay_next = 0;
  std::chrono::steady_clock::time_point replay_wall0;
};

namespace {

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, Server::Impl& hub, std::size_t capacity)
      : ws_(std::move(socket)), hub_(hub), capacity_(std::max<std::size_t>(capacity, 2)) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->hub_.join(self);
      self->read();
    });
  }

  void send(std::shared_ptr<const std::string> message) {
    if (closing_) return;
    // The front entry may be mid-write; drop the oldest one behind it.
    if (queue_.size() >= capacity_) queue_.erase(queue_.begin() + (writing_ ? 1 : 0));
    queue_.push_back(std::move(message));
    if (!writing_) write();
  }

  void fail(const std::string& text) {
    send(std::make_shared<const std::string>(error_message(text).dump()));
    closing_ = true;
    if (!writing_) close();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->hub_.leave(self.get());
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->hub_.handle(self, text);
      if (!self->closing_) self->read();
    });
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.pop_front();
      if (ec) {
        self->writing_ = false;
        self->hub_.leave(self.get());
        return;
      }
      if (!self->queue_.empty()) {
        self->write();
        return;
      }
      self->writing_ = false;
      if (self->closing_) self->close();
    });
  }

  void close() {
    ws_.async_close(websocket::close_code::policy_error, [self = shared_from_this()](beast::error_code) {
      self->hub_.leave(self.get());
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Server::Impl& hub_;
  std::size_t capacity_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool closing_ = false;
};

}  // namespace

Server::Impl::Impl(EngineConfig config, ServeOptions opts) : options(std::move(opts)) {
  if (!options.osc_dest.empty()) osc = std::make_unique<osc::UdpSender>(options.osc_dest);
  engine = std::make_unique<SessionEngine>(std::move(config), osc.get());

  beast::error_code ec;
  const auto address = asio::ip::make_address(options.bind_address, ec);
  if (ec) throw Error(ErrorKind::BindError, "bad bind address " + options.bind_address + ": " + ec.message());
  if (options.ws_port < 0 || options.ws_port > 65535)
    throw Error(ErrorKind::BindError, "port out of range: " + std::to_string(options.ws_port));
  const tcp::endpoint endpoint{address, static_cast<unsigned short>(options.ws_port)};
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec)
    throw Error(ErrorKind::BindError, "cannot listen on " + options.bind_address + ":" +
                                          std::to_string(options.ws_port) + ": " + ec.message());
}

void Server::Impl::accept() {
  acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Client>(std::move(socket), *this, options.client_queue)->start();
    accept();
  });
}

void Server::Impl::join(const std::shared_ptr<Client>& c) {
  clients.insert(c);
  c->send(std::make_shared<const std::string>(engine->state_message().dump()));
}

void Server::Impl::leave(Client* c) {
  for (auto it = clients.begin(); it != clients.end(); ++it)
    if (it->get() == c) {
      clients.erase(it);
      return;
    }
}

void Server::Impl::broadcast(const json& message) {
  const auto text = std::make_shared<const std::string>(message.dump());
  for (const auto& c : clients) c->send(text);
}

void Server::Impl::after_engine_step(Phase before) {
  broadcast(engine->state_message());
  if (before != Phase::Cosmos && engine->phase() == Phase::Cosmos) broadcast(engine->cosmos_message());
}

void Server::Impl::handle(const std::shared_ptr<Client>& c, const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception& e) {
    c->fail(std::string("malformed message: ") + e.what());
    return;
  }
  if (!msg.is_object() || (msg.contains("cmd") == msg.contains("frames"))) {
    c->fail("message must have exactly one of \"cmd\" or \"frames\"");
    return;
  }

  if (msg.contains("cmd")) {
    Command cmd;
    try {
      cmd = command_from_json(msg, engine->clock());
    } catch (const Error& e) {
      c->fail(e.what());
      return;
    }
    const Phase before = engine->phase();
    try {
      engine->apply(cmd);
    } catch (const Error& e) {
      c->send(std::make_shared<const std::string>(
          json{{"type", "error"}, {"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump()));
      return;
    }
    after_engine_step(before);
    return;
  }

  if (!msg["frames"].is_array()) {
    c->fail("\"frames\" must be an array");
    return;
  }
  std::vector<RawFrame> raws;
  try {
    for (const auto& rec : msg["frames"]) raws.push_back(raw_frame_from_json(rec));
  } catch (const Error& e) {
    c->fail(e.what());
    return;
  }
  for (const auto& raw : raws) {
    const Phase before = engine->phase();
    std::vector<HopResult> hops;
    try {
      hops = engine->on_raw_frame(raw);
    } catch (const Error& e) {
      c->fail(e.what());
      return;
    }
    if (!hops.empty() || engine->phase() != before) after_engine_step(before);
  }
}

void Server::Impl::schedule_replay() {
  if (replay_next >= options.replay.size()) return;
  const double t0 = options.replay.front().timestamp;
  const double speed = options.replay_speed > 0.0 ? options.replay_speed : 1.0;
  const double rel = (options.replay[replay_next].timestamp - t0) / speed;
  replay_timer.expires_at(replay_wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                             std::chrono::duration<double>(rel)));
  replay_timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    const Phase before = engine->phase();
    try {
      const auto hops = engine->on_frame(options.replay[replay_next]);
      if (!hops.empty() || engine->phase() != before) after_engine_step(before);
    } catch (const Error& e) {
      broadcast(error_message(std::string("replay: ") + e.what()));
    }
    ++replay_next;
    schedule_replay();
  });
}

Server::Server(EngineConfig config, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {}

Server::~Server() = default;

int Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  impl_->accept();
  if (impl_->options.handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) stop();
    });
  }
  if (!impl_->options.replay.empty()) {
    impl_->replay_wall0 = std::chrono::steady_clock::now();
    impl_->schedule_replay();
  }
  impl_->ioc.run();
}

void Server::stop() {
  asio::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    impl->replay_timer.cancel();
    impl->signals.cancel(ec);
    impl->ioc.stop();
  });
}

}  // namespace kinaffect
