#include "harness/protocol.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ostream>
#include <thread>

namespace harness::protocol {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw ProtocolError("malformed message: " + what); }

int as_byte(const json& v, const char* what) {
  if (!v.is_number_integer()) malformed(std::string(what) + " must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < 0 || x > 255) malformed(std::string(what) + " out of byte range");
  return static_cast<int>(x);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object()) malformed("expected an object");
  const auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

json observation_to_json(const Observation& obs) {
  json view = json::array();
  for (int x = 0; x < Observation::kViewSize; ++x) {
    json column = json::array();
    for (int y = 0; y < Observation::kViewSize; ++y) {
      column.push_back({obs.at(x, y, 0), obs.at(x, y, 1), obs.at(x, y, 2)});
    }
    view.push_back(std::move(column));
  }
  return {{"view", std::move(view)},
          {"carried_type", obs.carried_type},
          {"carried_color", obs.carried_color}};
}

Observation observation_from_json(const json& j) {
  Observation obs;
  const json& view = field(j, "view");
  if (!view.is_array() || view.size() != Observation::kViewSize) malformed("view must be 7x7x3");
  for (int x = 0; x < Observation::kViewSize; ++x) {
    const json& column = view[static_cast<std::size_t>(x)];
    if (!column.is_array() || column.size() != Observation::kViewSize) {
      malformed("view must be 7x7x3");
    }
    for (int y = 0; y < Observation::kViewSize; ++y) {
      const json& cell = column[static_cast<std::size_t>(y)];
      if (!cell.is_array() || cell.size() != Observation::kChannels) {
        malformed("view must be 7x7x3");
      }
      for (int c = 0; c < Observation::kChannels; ++c) {
        obs.at(x, y, c) = static_cast<std::uint8_t>(as_byte(cell[static_cast<std::size_t>(c)], "view cell"));
      }
    }
  }
  obs.carried_type = static_cast<std::uint8_t>(as_byte(field(j, "carried_type"), "carried_type"));
  obs.carried_color = static_cast<std::uint8_t>(as_byte(field(j, "carried_color"), "carried_color"));
  return obs;
}

json transition_to_json(const Transition& t) {
  return {{"observation", observation_to_json(t.observation)},
          {"action", t.action},
          {"reward", t.reward ? json(*t.reward) : json(nullptr)},
          {"done", t.done},
          {"next_observation", observation_to_json(t.next_observation)}};
}

Transition transition_from_json(const json& j) {
  Transition t;
  t.observation = observation_from_json(field(j, "observation"));
  const json& action = field(j, "action");
  if (!action.is_number_integer()) malformed("action must be an integer");
  t.action = action.get<int>();
  const json& reward = field(j, "reward");
  if (!reward.is_null()) {
    if (!reward.is_number()) malformed("reward must be a number or null");
    t.reward = reward.get<double>();
  }
  const json& done = field(j, "done");
  if (!done.is_boolean()) malformed("done must be a boolean");
  t.done = done.get<bool>();
  t.next_observation = observation_from_json(field(j, "next_observation"));
  return t;
}

json event_to_json(const AgentEvent& event) {
  json j{{"name", event_name(event)}};
  if (const auto* e = std::get_if<BlockStart>(&event)) {
    j["is_learning_allowed"] = e->is_learning_allowed;
  } else if (const auto* e = std::get_if<TaskStart>(&event)) {
    j["task_name"] = e->task_name;
  } else if (const auto* e = std::get_if<TaskVariantStart>(&event)) {
    j["task_name"] = e->task_name;
    j["variant_name"] = e->variant_name;
    j["limit"] = {{to_string(e->limit.kind), e->limit.amount}};
  }
  return j;
}

AgentEvent event_from_json(const json& j) {
  const json& name_field = field(j, "name");
  if (!name_field.is_string()) malformed("event name must be a string");
  const std::string name = name_field.get<std::string>();
  auto string_field = [&j](const char* key) {
    const json& v = field(j, key);
    if (!v.is_string()) malformed(std::string(key) + " must be a string");
    return v.get<std::string>();
  };
  if (name == "block_start") {
    const json& v = field(j, "is_learning_allowed");
    if (!v.is_boolean()) malformed("is_learning_allowed must be a boolean");
    return BlockStart{v.get<bool>()};
  }
  if (name == "block_end") return BlockEnd{};
  if (name == "task_start") return TaskStart{string_field("task_name")};
  if (name == "task_end") return TaskEnd{};
  if (name == "task_variant_start") {
    TaskVariantStart e{string_field("task_name"), string_field("variant_name"), {}};
    const json& limit = field(j, "limit");
    if (!limit.is_object() || limit.size() != 1) malformed("limit must have one entry");
    const bool episodes = limit.contains("episodes");
    if (!episodes && !limit.contains("steps")) malformed("limit must be episodes or steps");
    const json& amount = limit.begin().value();
    if (!amount.is_number_integer()) malformed("limit amount must be an integer");
    e.limit = {episodes ? LimitKind::Episodes : LimitKind::Steps, amount.get<std::int64_t>()};
    return e;
  }
  if (name == "task_variant_end") return TaskVariantEnd{};
  malformed("unknown event '" + name + "'");
}

// ---------------------------------------------------------------------------
// Transports

FdTransport::FdTransport(int read_fd, int write_fd, bool owns, std::string name)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns), name_(std::move(name)) {
  ignore_sigpipe();
}

FdTransport::~FdTransport() { close_fds(); }

void FdTransport::close_fds() {
  if (owns_) {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
  }
  read_fd_ = write_fd_ = -1;
}

void FdTransport::close() { close_fds(); }

void FdTransport::send_line(const std::string& line) {
  if (write_fd_ < 0) throw ProtocolError(name_ + ": transport closed");
  std::string data = line;
  data += '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(sys_error(name_ + ": write failed"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string FdTransport::receive_line(std::chrono::milliseconds timeout) {
  if (read_fd_ < 0) throw ProtocolError(name_ + ": transport closed");
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) {
      throw ProtocolError(name_ + ": reply timeout after " + std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1'000'000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(sys_error(name_ + ": poll failed"));
    }
    if (rc == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ProtocolError(sys_error(name_ + ": read failed"));
    }
    if (n == 0) throw ProtocolError(name_ + ": peer closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

SubprocessTransport::SubprocessTransport(const std::string& command)
    : FdTransport(-1, -1, true, "agent process '" + command + "'") {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw ProtocolError(sys_error("pipe"));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ProtocolError(sys_error("pipe"));
  }
  pid_ = ::fork();
  if (pid_ < 0) throw ProtocolError(sys_error("fork"));
  if (pid_ == 0) {
    ::setpgid(0, 0);
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid_, pid_);
  ::close(to_child[0]);
  ::close(from_child[1]);
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
  ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
  ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
}

SubprocessTransport::~SubprocessTransport() {
  try {
    close();
  } catch (...) {
  }
}

std::string SubprocessTransport::exit_description() {
  if (pid_ > 0 && !exit_status_) {
    // Give a dying child a moment to be reaped so the message is useful.
    for (int i = 0; i < 50 && !exit_status_; ++i) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  return exit_status_ ? " (exit status " + std::to_string(*exit_status_) + ")" : "";
}

std::string SubprocessTransport::receive_line(std::chrono::milliseconds timeout) {
  try {
    return FdTransport::receive_line(timeout);
  } catch (const ProtocolError& e) {
    if (std::string(e.what()).find("peer closed") != std::string::npos) {
      throw ProtocolError(name_ + ": process exited" + exit_description());
    }
    throw;
  }
}

void SubprocessTransport::close() {
  close_fds();
  if (pid_ <= 0 || exit_status_) return;
  const auto deadline = Clock::now() + std::chrono::seconds(5);
  for (;;) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      return;
    }
    if (r < 0) return;
    if (Clock::now() > deadline) {
      ::kill(-pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      exit_status_ = 128 + SIGKILL;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

std::unique_ptr<Transport> connect_tcp(const std::string& host_port) {
  const auto colon = host_port.rfind(':');
  if (colon == std::string::npos) throw ProtocolError("tcp address must be host:port: " + host_port);
  const std::string host = host_port.substr(0, colon);
  const std::string port = host_port.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw ProtocolError("cannot resolve " + host_port + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError(sys_error("cannot connect to " + host_port));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdTransport>(fd, fd, true, "tcp agent " + host_port);
}

TcpListener::TcpListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw ProtocolError(sys_error("socket"));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 1) != 0) {
    const std::string msg = sys_error("cannot listen on port " + std::to_string(port));
    ::close(fd_);
    throw ProtocolError(msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Transport> TcpListener::accept(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) throw ProtocolError("no connection within timeout");
  const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) throw ProtocolError(sys_error("accept"));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdTransport>(fd, fd, true, "tcp harness connection");
}

// ---------------------------------------------------------------------------
// Server-side agent handle

ProtocolAgent::ProtocolAgent(std::unique_ptr<Transport> transport, const AgentContext& ctx,
                             ProtocolOptions options)
    : transport_(std::move(transport)), options_(options) {
  json hello{{"type", "handshake"},
             {"version", kVersion},
             {"action_space", {{"n", action::kCount}}},
             {"observation_space",
              {{"view", {Observation::kViewSize, Observation::kViewSize, Observation::kChannels}}}},
             {"num_envs", ctx.num_envs},
             {"agent_seed", ctx.agent_seed}};
  const json ack = request(std::move(hello), "handshake_ack");
  if (ack.contains("version")) {
    const json& v = ack["version"];
    if (!v.is_number_integer() || v.get<std::int64_t>() != kVersion) {
      throw ProtocolError("handshake version mismatch: server speaks " +
                          std::to_string(kVersion) + ", agent answered " + v.dump());
    }
  }
  const json& name = field(ack, "agent_name");
  if (!name.is_string()) malformed("agent_name must be a string");
  name_ = name.get<std::string>();
}

ProtocolAgent::~ProtocolAgent() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ProtocolAgent::shutdown() {
  if (!transport_) return;
  auto transport = std::move(transport_);
  try {
    transport->send_line(json{{"type", "shutdown"}, {"seq", ++seq_}}.dump());
  } catch (const ProtocolError&) {
  }
  transport->close();
}

json ProtocolAgent::request(json message, const char* reply_type) {
  if (!transport_) throw ProtocolError("agent connection already shut down");
  const std::int64_t seq = ++seq_;
  message["seq"] = seq;
  // Keep "type" first on the wire for readability.
  json ordered{{"type", message["type"]}};
  ordered.update(message);
  transport_->send_line(message.dump());
  const std::string line = transport_->receive_line(options_.timeout);
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(transport_->describe() + ": malformed reply: " + e.what());
  }
  try {
    const json& seq_field = field(reply, "seq");
    if (!seq_field.is_number_integer() || seq_field.get<std::int64_t>() != seq) {
      throw ProtocolError("sequence mismatch: expected seq " + std::to_string(seq) + ", got " +
                          seq_field.dump());
    }
    const json& type = field(reply, "type");
    if (type == "error") {
      throw ProtocolError("agent reported an error: " + reply.value("message", std::string("?")));
    }
    if (!type.is_string() || type.get<std::string>() != reply_type) {
      throw ProtocolError(std::string("unexpected reply type ") + type.dump() + ", expected \"" +
                          reply_type + "\"");
    }
  } catch (const ProtocolError& e) {
    throw ProtocolError(transport_->describe() + ": " + e.what());
  }
  return reply;
}

ActionSlots ProtocolAgent::choose_actions(std::span<const std::optional<Observation>> observations) {
  json list = json::array();
  for (const auto& obs : observations) list.push_back(obs ? observation_to_json(*obs) : json(nullptr));
  const json reply = request({{"type", "choose_actions"}, {"observations", std::move(list)}}, "actions");
  const json& actions = field(reply, "actions");
  if (!actions.is_array()) malformed("actions must be an array");
  ActionSlots out;
  out.reserve(actions.size());
  for (const json& a : actions) {
    if (a.is_null()) {
      out.emplace_back();
    } else if (a.is_number_integer()) {
      out.emplace_back(a.get<int>());
    } else {
      malformed("actions entries must be integers or null");
    }
  }
  return out;
}

void ProtocolAgent::receive_transitions(std::span<const std::optional<Transition>> transitions) {
  json list = json::array();
  for (const auto& t : transitions) list.push_back(t ? transition_to_json(*t) : json(nullptr));
  request({{"type", "receive_transitions"}, {"transitions", std::move(list)}}, "ack");
}

void ProtocolAgent::handle_event(const AgentEvent& event) {
  json message = event_to_json(event);
  message["type"] = "event";
  request(std::move(message), "ack");
}

AgentFactory protocol_agent_factory(const std::string& spec, ProtocolOptions options) {
  if (spec.rfind("exec:", 0) == 0) {
    const std::string command = spec.substr(5);
    if (command.empty()) throw std::invalid_argument("exec: agent needs a command");
    return [command, options](const AgentContext& ctx) -> std::unique_ptr<Agent> {
      return std::make_unique<ProtocolAgent>(std::make_unique<SubprocessTransport>(command), ctx,
                                             options);
    };
  }
  if (spec.rfind("tcp:", 0) == 0) {
    const std::string address = spec.substr(4);
    return [address, options](const AgentContext& ctx) -> std::unique_ptr<Agent> {
      return std::make_unique<ProtocolAgent>(connect_tcp(address), ctx, options);
    };
  }
  throw std::invalid_argument("agent spec must start with exec: or tcp: " + spec);
}

// ---------------------------------------------------------------------------
// Agent-side loop

int run_agent_loop(const AgentFactory& factory, Transport& transport, std::ostream& diagnostics,
                   std::chrono::milliseconds timeout) {
  std::unique_ptr<Agent> agent;
  auto reply = [&transport](json message, const json& seq) {
    message["seq"] = seq;
    transport.send_line(message.dump());
  };
  for (;;) {
    std::string line;
    try {
      line = transport.receive_line(timeout);
    } catch (const ProtocolError& e) {
      diagnostics << "agent: connection lost before shutdown: " << e.what() << "\n";
      return 1;
    }
    try {
      const json msg = json::parse(line);
      const json& seq = field(msg, "seq");
      if (!seq.is_number_integer()) malformed("seq must be an integer");
      const json& type_field = field(msg, "type");
      if (!type_field.is_string()) malformed("type must be a string");
      const std::string type = type_field.get<std::string>();

      if (type == "shutdown") return 0;
      if (type == "handshake") {
        const json& version = field(msg, "version");
        if (!version.is_number_integer() || version.get<std::int64_t>() != kVersion) {
          throw ProtocolError("unsupported protocol version " + version.dump());
        }
        const json& seed = field(msg, "agent_seed");
        const json& envs = field(msg, "num_envs");
        if (!seed.is_number_unsigned() || !envs.is_number_integer()) {
          malformed("agent_seed and num_envs must be integers");
        }
        agent = factory(AgentContext{seed.get<std::uint64_t>(), envs.get<std::int64_t>()});
        reply({{"type", "handshake_ack"}, {"agent_name", agent->name()}, {"version", kVersion}}, seq);
        continue;
      }
      if (!agent) throw ProtocolError("message '" + type + "' before handshake");
      if (type == "event") {
        agent->handle_event(event_from_json(msg));
        reply({{"type", "ack"}}, seq);
      } else if (type == "choose_actions") {
        const json& list = field(msg, "observations");
        if (!list.is_array()) malformed("observations must be an array");
        ObservationSlots observations;
        for (const json& o : list) {
          observations.push_back(o.is_null() ? std::nullopt
                                             : std::optional<Observation>(observation_from_json(o)));
        }
        json actions = json::array();
        for (const auto& a : agent->choose_actions(observations)) {
          actions.push_back(a ? json(*a) : json(nullptr));
        }
        reply({{"type", "actions"}, {"actions", std::move(actions)}}, seq);
      } else if (type == "receive_transitions") {
        const json& list = field(msg, "transitions");
        if (!list.is_array()) malformed("transitions must be an array");
        TransitionSlots transitions;
        for (const json& t : list) {
          transitions.push_back(t.is_null() ? std::nullopt
                                            : std::optional<Transition>(transition_from_json(t)));
        }
        agent->receive_transitions(transitions);
        reply({{"type", "ack"}}, seq);
      } else {
        malformed("unknown message type '" + type + "'");
      }
    } catch (const json::exception& e) {
      diagnostics << "agent: malformed message: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      diagnostics << "agent: " << e.what() << "\n";
      return 2;
    }
  }
}

}  // namespace harness::protocol
