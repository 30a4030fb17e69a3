#include "kinaffect/osc.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>

namespace kinaffect::osc {

namespace {

std::size_t padded(std::size_t n) { return (n + 3) & ~std::size_t{3}; }

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
  const std::size_t total = padded(s.size() + 1);
  out.resize(out.size() + (total - s.size()), 0);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

[[noreturn]] void malformed(std::size_t offset, const std::string& why) {
  throw Error(ErrorKind::MalformedPacket, "offset " + std::to_string(offset) + ": " + why);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  std::string string() {
    const std::size_t start = pos_;
    const auto* begin = bytes_.data() + pos_;
    const auto* nul = static_cast<const std::uint8_t*>(std::memchr(begin, 0, bytes_.size() - pos_));
    if (nul == nullptr) malformed(start, "unterminated string");
    const std::size_t len = static_cast<std::size_t>(nul - begin);
    const std::size_t total = padded(len + 1);
    if (start + total > bytes_.size()) malformed(start, "string padding runs past end");
    for (std::size_t i = len; i < total; ++i)
      if (bytes_[start + i] != 0) malformed(start + i, "nonzero string padding");
    pos_ += total;
    return std::string(reinterpret_cast<const char*>(begin), len);
  }

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) malformed(pos_, "truncated 32-bit argument");
    const std::uint32_t v = (std::uint32_t{bytes_[pos_]} << 24) | (std::uint32_t{bytes_[pos_ + 1]} << 16) |
                            (std::uint32_t{bytes_[pos_ + 2]} << 8) | std::uint32_t{bytes_[pos_ + 3]};
    pos_ += 4;
    return v;
  }

  Blob blob() {
    const std::size_t start = pos_;
    const std::uint32_t size = u32();
    const std::size_t total = padded(size);
    if (pos_ + total > bytes_.size() || total < size) malformed(start, "truncated blob");
    Blob b(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
           bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + size));
    for (std::size_t i = size; i < total; ++i)
      if (bytes_[pos_ + i] != 0) malformed(pos_ + i, "nonzero blob padding");
    pos_ += total;
    return b;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Packet::type_tags() const {
  std::string tags;
  for (const auto& a : arguments) {
    switch (a.index()) {
      case 0: tags += 'i'; break;
      case 1: tags += 'f'; break;
      case 2: tags += 's'; break;
      case 3: tags += 'b'; break;
    }
  }
  return tags;
}

std::vector<std::uint8_t> encode(const Packet& packet) {
  if (packet.address.empty() || packet.address.front() != '/')
    throw Error(ErrorKind::MalformedPacket, "OSC address must start with '/': " + packet.address);
  if (packet.address.find('\0') != std::string::npos)
    throw Error(ErrorKind::MalformedPacket, "OSC address contains NUL");

  std::vector<std::uint8_t> out;
  put_string(out, packet.address);
  put_string(out, "," + packet.type_tags());
  for (const auto& arg : packet.arguments) {
    if (const auto* i = std::get_if<std::int32_t>(&arg)) {
      put_u32(out, static_cast<std::uint32_t>(*i));
    } else if (const auto* f = std::get_if<float>(&arg)) {
      put_u32(out, std::bit_cast<std::uint32_t>(*f));
    } else if (const auto* s = std::get_if<std::string>(&arg)) {
      if (s->find('\0') != std::string::npos) throw Error(ErrorKind::MalformedPacket, "OSC string contains NUL");
      put_string(out, *s);
    } else if (const auto* b = std::get_if<Blob>(&arg)) {
      put_u32(out, static_cast<std::uint32_t>(b->size()));
      out.insert(out.end(), b->begin(), b->end());
      out.resize(padded(out.size()), 0);
    }
  }
  return out;
}

Packet decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) malformed(bytes.size(), "length is not a multiple of 4");
  if (bytes.empty()) malformed(0, "empty packet");
  Reader r(bytes);
  Packet p;
  p.address = r.string();
  if (p.address.empty() || p.address.front() != '/') malformed(0, "address must start with '/'");
  if (r.done()) return p;  // tolerated: message without a type-tag string

  const std::size_t tag_offset = r.offset();
  const std::string tags = r.string();
  if (tags.empty() || tags.front() != ',') malformed(tag_offset, "type tag string must start with ','");
  for (std::size_t i = 1; i < tags.size(); ++i) {
    switch (tags[i]) {
      case 'i': p.arguments.emplace_back(static_cast<std::int32_t>(r.u32())); break;
      case 'f': p.arguments.emplace_back(std::bit_cast<float>(r.u32())); break;
      case 's': p.arguments.emplace_back(r.string()); break;
      case 'b': p.arguments.emplace_back(r.blob()); break;
      default:
        throw Error(ErrorKind::UnsupportedType, "offset " + std::to_string(tag_offset + i) +
                                                    ": unsupported OSC type tag '" + std::string(1, tags[i]) + "'");
    }
  }
  if (!r.done()) malformed(r.offset(), "trailing bytes after arguments");
  return p;
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == endpoint.size())
    throw Error(ErrorKind::SocketError, "expected host:port, got '" + endpoint + "'");
  const std::string host = endpoint.substr(0, colon);
  const std::string port_text = endpoint.substr(colon + 1);
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorKind::SocketError, "bad port in '" + endpoint + "'");
  }
  if (port == 0 || port > 65535) throw Error(ErrorKind::SocketError, "port out of range in '" + endpoint + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

UdpSender::UdpSender(const std::string& destination, std::size_t queue_capacity, ErrorHandler on_error)
    : capacity_(queue_capacity == 0 ? 1 : queue_capacity), on_error_(std::move(on_error)) {
  try {
    const auto [host, port] = parse_endpoint(destination);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* result = nullptr;
    const std::string port_text = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &result); rc != 0 || !result)
      throw Error(ErrorKind::SocketError, "cannot resolve '" + host + "': " + ::gai_strerror(rc));
    address_.assign(reinterpret_cast<const std::uint8_t*>(result->ai_addr),
                    reinterpret_cast<const std::uint8_t*>(result->ai_addr) + result->ai_addrlen);
    ::freeaddrinfo(result);
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw Error(ErrorKind::SocketError, std::string("socket: ") + std::strerror(errno));
  } catch (const Error& e) {
    report(e.what());
  }
  worker_ = std::thread([this] { run(); });
}

UdpSender::~UdpSender() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  if (fd_ >= 0) ::close(fd_);
}

void UdpSender::report(const std::string& message) {
  {
    std::lock_guard lock(mutex_);
    ++errors_;
  }
  if (on_error_) on_error_(message);
}

void UdpSender::send(const Packet& packet) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = encode(packet);
  } catch (const Error& e) {
    report(e.what());
    return;
  }
  {
    std::lock_guard lock(mutex_);
    if (queue_.size() >= capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(std::move(bytes));
  }
  cv_.notify_one();
}

void UdpSender::flush() {
  std::unique_lock lock(mutex_);
  drained_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

std::size_t UdpSender::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

std::size_t UdpSender::sent() const {
  std::lock_guard lock(mutex_);
  return sent_;
}

std::size_t UdpSender::errors() const {
  std::lock_guard lock(mutex_);
  return errors_;
}

void UdpSender::run() {
  for (;;) {
    std::vector<std::uint8_t> bytes;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) {
        drained_.notify_all();
        if (stop_) return;
        continue;
      }
      bytes = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
    }
    bool ok = false;
    std::string failure;
    if (fd_ < 0) {
      failure = "no socket";
    } else {
      const auto rc = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(address_.data()),
                               static_cast<socklen_t>(address_.size()));
      ok = rc == static_cast<ssize_t>(bytes.size());
      if (!ok) failure = std::string("sendto: ") + std::strerror(errno);
    }
    if (ok) {
      std::lock_guard lock(mutex_);
      ++sent_;
    } else {
      report(failure);
    }
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
      if (queue_.empty()) drained_.notify_all();
    }
  }
}

}  // namespace kinaffect::osc
