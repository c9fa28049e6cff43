#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ec/wire.hpp"

namespace ec {

/// Reliable, ordered message pipe carrying frame payloads.
///
/// send() and receive() may be called from different threads; close() may
/// be called from any thread and unblocks a pending receive().
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws ProtocolError if the transport is closed.
  virtual void send(std::span<const std::uint8_t> payload) = 0;
  /// Next payload, or nullopt once the peer has closed and nothing is queued.
  virtual std::optional<std::vector<std::uint8_t>> receive() = 0;
  virtual void close() = 0;
};

void send_message(Transport& transport, const Message& message);
std::optional<Message> receive_message(Transport& transport);

/// Two connected in-process endpoints.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_channel_pair();

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
};

/// "host:port", "host" or ":port".
Address parse_address(const std::string& text);

/// Length-prefixed frames over a TCP stream.
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(int fd);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  /// Retries until `timeout` elapses while the peer is not yet listening.
  static std::unique_ptr<TcpTransport> connect(const Address& address,
                                               std::chrono::milliseconds timeout = std::chrono::seconds(10));

  void send(std::span<const std::uint8_t> payload) override;
  std::optional<std::vector<std::uint8_t>> receive() override;
  void close() override;

 private:
  int fd_;
};

class TcpListener {
 public:
  /// Port 0 picks a free port; see port().
  explicit TcpListener(const Address& address);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Blocks for the next connection; nullptr after close().
  std::unique_ptr<TcpTransport> accept();
  void close();

 private:
  int fd_;
  std::uint16_t port_ = 0;
};

}  // namespace ec
