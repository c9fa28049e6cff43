#include "ec/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "ec/error.hpp"

namespace ec {

void send_message(Transport& transport, const Message& message) { transport.send(encode_payload(message)); }

std::optional<Message> receive_message(Transport& transport) {
  auto payload = transport.receive();
  if (!payload) return std::nullopt;
  return decode_payload(*payload);
}

namespace {

struct ChannelState {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> queues[2];  // queues[k]: messages for endpoint k
  bool closed = false;
};

class ChannelEndpoint final : public Transport {
 public:
  ChannelEndpoint(std::shared_ptr<ChannelState> state, int side) : state_(std::move(state)), side_(side) {}
  ~ChannelEndpoint() override { close(); }

  void send(std::span<const std::uint8_t> payload) override {
    std::lock_guard lock(state_->mutex);
    if (state_->closed) throw ProtocolError("channel is closed");
    state_->queues[1 - side_].emplace_back(payload.begin(), payload.end());
    state_->cv.notify_all();
  }

  std::optional<std::vector<std::uint8_t>> receive() override {
    std::unique_lock lock(state_->mutex);
    auto& queue = state_->queues[side_];
    state_->cv.wait(lock, [&] { return !queue.empty() || state_->closed; });
    if (queue.empty()) return std::nullopt;
    auto out = std::move(queue.front());
    queue.pop_front();
    return out;
  }

  void close() override {
    std::lock_guard lock(state_->mutex);
    state_->closed = true;
    state_->cv.notify_all();
  }

 private:
  std::shared_ptr<ChannelState> state_;
  int side_;
};

void write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

// false on orderly EOF before any byte of this read.
bool read_all(int fd, std::uint8_t* data, std::size_t size) {
  std::size_t got = 0;
  while (got < size) {
    const ssize_t n = ::recv(fd, data + got, size - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

sockaddr_in resolve(const Address& address) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string host = address.host.empty() ? "0.0.0.0" : address.host;
  if (const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &result); rc != 0) {
    throw ProtocolError("cannot resolve '" + host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, result->ai_addr, sizeof addr);
  ::freeaddrinfo(result);
  addr.sin_port = htons(address.port);
  return addr;
}

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_channel_pair() {
  auto state = std::make_shared<ChannelState>();
  return {std::make_unique<ChannelEndpoint>(state, 0), std::make_unique<ChannelEndpoint>(state, 1)};
}

Address parse_address(const std::string& text) {
  Address out;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    if (!text.empty()) out.host = text;
    return out;
  }
  if (colon > 0) out.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw ConfigError("invalid port in address '" + text + "'");
  }
  out.port = static_cast<std::uint16_t>(value);
  return out;
}

TcpTransport::TcpTransport(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpTransport::connect(const Address& address, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(address);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError(std::string("socket failed: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      return std::make_unique<TcpTransport>(fd);
    }
    const int err = errno;
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw ProtocolError("cannot connect to " + address.host + ":" + std::to_string(address.port) + ": " +
                          std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void TcpTransport::send(std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  std::uint8_t header[4];
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) header[i] = static_cast<std::uint8_t>(n >> (8 * i));
  write_all(fd_, header, 4);
  write_all(fd_, payload.data(), payload.size());
}

std::optional<std::vector<std::uint8_t>> TcpTransport::receive() {
  std::uint8_t header[4];
  if (!read_all(fd_, header, 4)) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= std::uint32_t{header[i]} << (8 * i);
  if (n > kMaxFrameBytes) throw ProtocolError("incoming frame of " + std::to_string(n) + " bytes is too large");
  std::vector<std::uint8_t> payload(n);
  if (n > 0 && !read_all(fd_, payload.data(), n)) throw ProtocolError("connection closed mid-frame");
  return payload;
}

void TcpTransport::close() { ::shutdown(fd_, SHUT_RDWR); }

TcpListener::TcpListener(const Address& address) : fd_(::socket(AF_INET, SOCK_STREAM, 0)) {
  if (fd_ < 0) throw ProtocolError(std::string("socket failed: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const sockaddr_in addr = resolve(address);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
    const std::string reason = std::strerror(errno);
    ::close(fd_);
    throw ProtocolError("cannot listen on " + address.host + ":" + std::to_string(address.port) + ": " + reason);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpListener::accept() {
  while (true) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpTransport>(fd);
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return nullptr;
  }
}

void TcpListener::close() { ::shutdown(fd_, SHUT_RDWR); }

}  // namespace ec
