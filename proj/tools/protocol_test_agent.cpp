// Agent-side process speaking the JSON Lines protocol on stdin/stdout.
// Wraps a built-in agent, or misbehaves on purpose when --fault is given so
// the server's error handling can be exercised.

#include <unistd.h>

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "harness/agents.hpp"
#include "harness/protocol.hpp"

using nlohmann::json;
using namespace harness;

namespace {

// Answers the handshake honestly, then applies `fault` to the first
// choose_actions request.
int run_faulty(const std::string& fault, protocol::Transport& transport) {
  for (;;) {
    std::string line;
    try {
      line = transport.receive_line(std::chrono::hours(1));
    } catch (const protocol::ProtocolError&) {
      return 1;
    }
    const json msg = json::parse(line);
    const auto seq = msg.at("seq").get<std::int64_t>();
    const std::string type = msg.at("type").get<std::string>();
    if (type == "shutdown") return 0;
    if (type == "handshake") {
      if (fault == "bad-version") {
        transport.send_line(json{{"type", "handshake_ack"}, {"seq", seq}, {"agent_name", "faulty"},
                                 {"version", 99}}.dump());
      } else if (fault == "handshake-exit") {
        return 3;
      } else {
        transport.send_line(
            json{{"type", "handshake_ack"}, {"seq", seq}, {"agent_name", "faulty"}}.dump());
      }
      continue;
    }
    if (type != "choose_actions") {
      transport.send_line(json{{"type", "ack"}, {"seq", seq}}.dump());
      continue;
    }
    const std::size_t n = msg.at("observations").size();
    json actions = json::array();
    for (const auto& o : msg.at("observations")) actions.push_back(o.is_null() ? json() : json(0));
    if (fault == "wrong-seq") {
      transport.send_line(json{{"type", "actions"}, {"seq", seq + 5}, {"actions", actions}}.dump());
    } else if (fault == "wrong-length") {
      actions.push_back(0);
      transport.send_line(json{{"type", "actions"}, {"seq", seq}, {"actions", actions}}.dump());
    } else if (fault == "bad-action") {
      actions[0] = 9;
      transport.send_line(json{{"type", "actions"}, {"seq", seq}, {"actions", actions}}.dump());
    } else if (fault == "garbage") {
      transport.send_line("{not json");
    } else if (fault == "wrong-type") {
      transport.send_line(json{{"type", "ack"}, {"seq", seq}}.dump());
    } else if (fault == "exit") {
      return 4;
    } else if (fault == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    } else {
      (void)n;
      std::cerr << "unknown fault " << fault << "\n";
      return 2;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Protocol test agent"};
  std::string agent = "random";
  std::string fault;
  std::int64_t port = -1;
  app.add_option("--agent", agent, "Built-in agent to wrap")->check(CLI::IsMember({"random", "tabular-q"}));
  app.add_option("--fault", fault, "Misbehaviour to exhibit");
  app.add_option("--listen", port, "Serve one TCP connection on this port instead of stdio");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<protocol::Transport> transport;
  if (port >= 0) {
    protocol::TcpListener listener(static_cast<std::uint16_t>(port));
    std::cout << listener.port() << std::endl;
    transport = listener.accept(std::chrono::seconds(30));
  } else {
    transport = std::make_unique<protocol::FdTransport>(STDIN_FILENO, STDOUT_FILENO, false, "stdio");
  }

  if (!fault.empty()) return run_faulty(fault, *transport);
  return protocol::run_agent_loop(builtin_agent_factory(agent), *transport, std::cerr);
}
