#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "kinaffect/core.hpp"

namespace kinaffect::osc {

using Blob = std::vector<std::uint8_t>;
using Argument = std::variant<std::int32_t, float, std::string, Blob>;

struct Packet {
  std::string address;
  std::vector<Argument> arguments;

  std::string type_tags() const;  // without the leading ','
  bool operator==(const Packet&) const = default;
};

/// OSC 1.0 message encoding: padded address, padded ",tags", big-endian
/// 4-byte-aligned arguments. Throws MalformedPacket for an address not
/// starting with '/' or strings containing NUL.
std::vector<std::uint8_t> encode(const Packet& packet);

/// Inverse of encode. Throws MalformedPacket (with the byte offset in the
/// message) or UnsupportedType for tags outside i/f/s/b.
Packet decode(std::span<const std::uint8_t> bytes);

/// Receives encoded packets. Implementations must not block the caller for
/// long; the engine calls send() from its processing context.
class PacketSink {
 public:
  virtual ~PacketSink() = default;
  virtual void send(const Packet& packet) = 0;
};

/// Collects packets in memory (tests, dry runs).
class MemorySink : public PacketSink {
 public:
  void send(const Packet& packet) override { packets.push_back(packet); }
  std::vector<Packet> packets;
};

/// Fire-and-forget UDP sender. Packets go through a bounded queue drained by
/// a background thread; when the queue is full the oldest packet is dropped.
/// Socket failures are reported through `on_error` and never thrown from
/// send().
class UdpSender : public PacketSink {
 public:
  using ErrorHandler = std::function<void(const std::string&)>;

  /// `destination` is "host:port" (IPv4 literal or resolvable name).
  explicit UdpSender(const std::string& destination, std::size_t queue_capacity = 1024, ErrorHandler on_error = {});
  ~UdpSender() override;

  UdpSender(const UdpSender&) = delete;
  UdpSender& operator=(const UdpSender&) = delete;

  void send(const Packet& packet) override;

  /// Blocks until the queue is drained.
  void flush();

  std::size_t dropped() const;
  std::size_t sent() const;
  std::size_t errors() const;

 private:
  void run();
  void report(const std::string& message);

  int fd_ = -1;
  std::vector<std::uint8_t> address_;  // sockaddr storage
  std::size_t capacity_;
  ErrorHandler on_error_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable drained_;
  std::deque<std::vector<std::uint8_t>> queue_;
  bool stop_ = false;
  bool busy_ = false;
  std::size_t dropped_ = 0;
  std::size_t sent_ = 0;
  std::size_t errors_ = 0;
  std::thread worker_;
};

/// Splits "host:port"; throws SocketError on malformed input.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

}  // namespace kinaffect::osc
