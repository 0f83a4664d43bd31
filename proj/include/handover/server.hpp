#pragma once

// Line-delimited JSON over TCP: a thread-per-connection server around
// ProtocolHandler, and a small blocking client used by tests and tools.

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "handover/fusion.hpp"

namespace handover {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

/// "HOST:PORT" or "[v6]:PORT". Throws Error(Parse).
HostPort parse_host_port(std::string_view text);

inline constexpr std::size_t kMaxLineBytes = 16u << 20;

class TcpServer {
 public:
  explicit TcpServer(FusionService& fusion) : fusion_(fusion) {}
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and listens; throws Error(Io) on failure. Port 0 picks a free port.
  void bind(const HostPort& address);
  std::uint16_t port() const { return port_; }

  /// Accepts connections on a background thread.
  void start();
  /// Stops accepting, disconnects clients and joins every thread.
  void stop();

 private:
  void accept_loop();
  void serve_connection(int fd);

  FusionService& fusion_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex conns_mu_;
  std::vector<int> conn_fds_;
  std::vector<std::thread> conn_threads_;
};

class LineClient {
 public:
  /// Throws Error(Io) when the connection fails.
  LineClient(const std::string& host, std::uint16_t port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  void send_line(std::string_view line);
  /// Empty when the peer closed the connection.
  std::optional<std::string> read_line();
  /// send_line + read_line.
  std::optional<std::string> request(std::string_view line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace handover
