#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "harness/agent.hpp"

namespace harness::protocol {

inline constexpr int kVersion = 1;
inline constexpr std::chrono::milliseconds kDefaultTimeout{60'000};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire forms. Observations are {"view": [[[t, c, s] x 7] x 7],
// "carried_type": int, "carried_color": int} with view indexed [x][y].
nlohmann::json observation_to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& j);
nlohmann::json transition_to_json(const Transition& t);
Transition transition_from_json(const nlohmann::json& j);
/// {"name": ..., plus the event's fields}.
nlohmann::json event_to_json(const AgentEvent& event);
AgentEvent event_from_json(const nlohmann::json& j);

/// Line-oriented byte stream to one peer.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Throws ProtocolError on timeout, EOF or I/O failure.
  virtual std::string receive_line(std::chrono::milliseconds timeout) = 0;
  /// Waits for an orderly peer exit where that applies.
  virtual void close() {}
  virtual std::string describe() const = 0;
};

/// Reads and writes existing file descriptors. Owns them when `owns` is set.
class FdTransport : public Transport {
 public:
  FdTransport(int read_fd, int write_fd, bool owns, std::string name);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void send_line(const std::string& line) override;
  std::string receive_line(std::chrono::milliseconds timeout) override;
  void close() override;
  std::string describe() const override { return name_; }

 protected:
  void close_fds();

  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string name_;
  std::string buffer_;
};

/// Runs `/bin/sh -c command` with its stdin and stdout connected to us.
class SubprocessTransport final : public FdTransport {
 public:
  explicit SubprocessTransport(const std::string& command);
  ~SubprocessTransport() override;

  std::string receive_line(std::chrono::milliseconds timeout) override;
  void close() override;
  /// Exit status once the child has been reaped.
  std::optional<int> exit_status() const { return exit_status_; }

 private:
  std::string exit_description();

  int pid_ = -1;
  std::optional<int> exit_status_;
};

/// Connects to an agent listening on host:port.
std::unique_ptr<Transport> connect_tcp(const std::string& host_port);

/// Accepts one agent-side connection; used by C++ agent processes.
class TcpListener {
 public:
  explicit TcpListener(std::uint16_t port = 0);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Transport> accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct ProtocolOptions {
  std::chrono::milliseconds timeout = kDefaultTimeout;
};

/// Agent handle that forwards every callback to an external process with
/// strictly alternating request/response messages.
class ProtocolAgent final : public Agent {
 public:
  /// Performs the handshake; throws ProtocolError on failure.
  ProtocolAgent(std::unique_ptr<Transport> transport, const AgentContext& ctx,
                ProtocolOptions options = {});
  ~ProtocolAgent() override;

  std::string name() const override { return name_; }
  ActionSlots choose_actions(std::span<const std::optional<Observation>> observations) override;
  void receive_transitions(std::span<const std::optional<Transition>> transitions) override;
  void handle_event(const AgentEvent& event) override;

  /// Sends shutdown and releases the transport. Safe to call twice.
  void shutdown();

 private:
  nlohmann::json request(nlohmann::json message, const char* reply_type);

  std::unique_ptr<Transport> transport_;
  ProtocolOptions options_;
  std::int64_t seq_ = 0;
  std::string name_;
};

/// Factory for "exec:<command>" and "tcp:<host>:<port>" agent specs.
AgentFactory protocol_agent_factory(const std::string& spec, ProtocolOptions options = {});

/// Agent side of the protocol: answers messages with an agent built at
/// handshake time. Returns 0 after shutdown, nonzero on errors (reported to
/// `diagnostics`).
int run_agent_loop(const AgentFactory& factory, Transport& transport, std::ostream& diagnostics,
                   std::chrono::milliseconds timeout = std::chrono::hours(24));

}  // namespace harness::protocol
