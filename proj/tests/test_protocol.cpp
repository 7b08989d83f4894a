#include <gtest/gtest.h>

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <sstream>

#include "harness/agents.hpp"
#include "harness/protocol.hpp"
#include "harness/runner.hpp"
#include "oracles.hpp"

using namespace harness;
using namespace harness::protocol;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Observation sample_observation() {
  Observation o;
  for (std::size_t i = 0; i < o.view.size(); ++i) o.view[i] = static_cast<std::uint8_t>(i % 11);
  o.carried_type = 5;
  o.carried_color = 4;
  return o;
}

std::string agent_command(const std::string& args) {
  return std::string(PROTOCOL_TEST_AGENT) + " " + args;
}

std::unique_ptr<Agent> connect(const std::string& args,
                               std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  return protocol_agent_factory("exec:" + agent_command(args), ProtocolOptions{timeout})(
      AgentContext{5, 2});
}

// Returns the message of the first error thrown while driving one
// choose_actions round on two slots, or "" when none was thrown.
std::string first_error(const std::string& args,
                        std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  try {
    auto agent = connect(args, timeout);
    agent->handle_event(BlockStart{true});
    const ObservationSlots obs{sample_observation(), sample_observation()};
    const ActionSlots actions = agent->choose_actions(obs);
    if (actions.size() != obs.size()) return "ContractViolation: wrong length";
    for (const auto& a : actions) {
      if (!a || *a < 0 || *a >= action::kCount) return "ContractViolation: bad action";
    }
  } catch (const ProtocolError& e) {
    return std::string("ProtocolError: ") + e.what();
  }
  return "";
}

Curriculum tiny_curriculum() {
  auto variant = [](const char* task, std::int64_t n) {
    const TaskDefinition* def = TaskRegistry::instance().find(task);
    return TaskVariantSpec{task, "small", *def->find_variant("small"), ExperienceLimit::episodes(n),
                           false};
  };
  Block learn{BlockType::Learn,
              {TaskBlock{"Unlock", {variant("Unlock", 6)}}, TaskBlock{"DoorKey", {variant("DoorKey", 6)}}}};
  Block eval{BlockType::Eval, {TaskBlock{"Unlock", {variant("Unlock", 2)}}}};
  Curriculum c = generate_interleaved({learn}, eval, "tiny");
  c.num_parallel_envs = 2;
  return c;
}

}  // namespace

TEST(Codec, ObservationRoundTrip) {
  const Observation o = sample_observation();
  const json j = observation_to_json(o);
  ASSERT_EQ(j.at("view").size(), 7U);
  ASSERT_EQ(j.at("view")[0].size(), 7U);
  ASSERT_EQ(j.at("view")[0][0].size(), 3U);
  EXPECT_EQ(observation_from_json(j), o);
  EXPECT_EQ(observation_from_json(json::parse(j.dump())), o);
}

TEST(Codec, ObservationRejectsBadShape) {
  json j = observation_to_json(sample_observation());
  j["view"][2].erase(0);
  EXPECT_THROW(observation_from_json(j), ProtocolError);
  json k = observation_to_json(sample_observation());
  k["view"][0][0][0] = 300;
  EXPECT_THROW(observation_from_json(k), ProtocolError);
  EXPECT_THROW(observation_from_json(json::object()), ProtocolError);
}

TEST(Codec, TransitionKeepsHiddenReward) {
  const Transition hidden{sample_observation(), 3, std::nullopt, true, Observation{}};
  const json j = transition_to_json(hidden);
  EXPECT_TRUE(j.at("reward").is_null());
  EXPECT_EQ(transition_from_json(j), hidden);
  const Transition shown{Observation{}, 6, 0.9099999999999999, false, sample_observation()};
  EXPECT_EQ(transition_from_json(json::parse(transition_to_json(shown).dump())), shown);
}

TEST(Codec, EventsRoundTrip) {
  const std::vector<AgentEvent> events{
      BlockStart{true},
      BlockEnd{},
      TaskStart{"DoorKey"},
      TaskEnd{},
      TaskVariantStart{"DoorKey", "small", ExperienceLimit::episodes(4)},
      TaskVariantStart{"Unlock", "large", ExperienceLimit::steps(90)},
      TaskVariantEnd{}};
  for (const auto& e : events) {
    const json j = event_to_json(e);
    EXPECT_EQ(j.at("name").get<std::string>(), event_name(e));
    EXPECT_EQ(event_from_json(json::parse(j.dump())), e);
  }
  EXPECT_THROW(event_from_json(json{{"name", "lunch"}}), ProtocolError);
}

TEST(ProtocolAgentTest, WrapsBuiltinAgent) {
  auto agent = connect("--agent random");
  EXPECT_EQ(agent->name(), "random");
  agent->handle_event(BlockStart{true});
  const ObservationSlots obs{sample_observation(), std::nullopt};
  const ActionSlots actions = agent->choose_actions(obs);
  ASSERT_EQ(actions.size(), 2U);
  ASSERT_TRUE(actions[0].has_value());
  EXPECT_FALSE(actions[1].has_value());
  const TransitionSlots t{Transition{sample_observation(), *actions[0], 0.0, false,
                                     sample_observation()},
                          std::nullopt};
  agent->receive_transitions(t);
  agent->handle_event(BlockEnd{});
}

TEST(ProtocolAgentTest, SameActionsAsInProcessAgent) {
  auto remote = connect("--agent random");
  RandomAgent local(5);
  const ObservationSlots obs(3, sample_observation());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(remote->choose_actions(obs), local.choose_actions(obs));
}

TEST(ProtocolFaults, BadVersion) {
  const std::string err = first_error("--fault bad-version");
  EXPECT_NE(err.find("ProtocolError"), std::string::npos) << err;
  EXPECT_NE(err.find("version"), std::string::npos) << err;
}

TEST(ProtocolFaults, ExitDuringHandshake) {
  const std::string err = first_error("--fault handshake-exit");
  EXPECT_NE(err.find("ProtocolError"), std::string::npos) << err;
  EXPECT_NE(err.find("exit status 3"), std::string::npos) << err;
}

TEST(ProtocolFaults, WrongSequenceNamesBothNumbers) {
  const std::string err = first_error("--fault wrong-seq");
  EXPECT_NE(err.find("ProtocolError"), std::string::npos) << err;
  EXPECT_NE(err.find("expected seq 3"), std::string::npos) << err;
  EXPECT_NE(err.find("got 8"), std::string::npos) << err;
}

TEST(ProtocolFaults, WrongLengthSurfacesAsContractViolation) {
  EXPECT_NE(first_error("--fault wrong-length").find("ContractViolation"), std::string::npos);
}

TEST(ProtocolFaults, OutOfRangeActionSurfacesAsContractViolation) {
  EXPECT_NE(first_error("--fault bad-action").find("ContractViolation"), std::string::npos);
}

TEST(ProtocolFaults, GarbageLine) {
  const std::string err = first_error("--fault garbage");
  EXPECT_NE(err.find("ProtocolError"), std::string::npos) << err;
}

TEST(ProtocolFaults, WrongReplyType) {
  const std::string err = first_error("--fault wrong-type");
  EXPECT_NE(err.find("ProtocolError"), std::string::npos) << err;
  EXPECT_NE(err.find("actions"), std::string::npos) << err;
}

TEST(ProtocolFaults, PeerExit) {
  const std::string err = first_error("--fault exit");
  EXPECT_NE(err.find("exit status 4"), std::string::npos) << err;
}

TEST(ProtocolFaults, Timeout) {
  const std::string err = first_error("--fault hang", std::chrono::milliseconds(300));
  EXPECT_NE(err.find("timeout"), std::string::npos) << err;
}

TEST(ProtocolFaults, MissingCommand) {
  try {
    protocol_agent_factory("exec:/nonexistent/agent-binary")(AgentContext{1, 1});
    FAIL();
  } catch (const ProtocolError& e) {
    SUCCEED() << e.what();
  }
  EXPECT_THROW(protocol_agent_factory("pigeon:somewhere"), std::invalid_argument);
}

TEST(ProtocolFaults, RunnerReportsContractViolation) {
  auto agent = connect("--fault bad-action");
  auto ctx = LifetimeContext::derive(1, 0);
  struct Sink final : EpisodeSink {
    void append_episode(const EpisodeRecord&) override {}
  } sink;
  EXPECT_THROW(run_lifetime(tiny_curriculum(), *agent, ctx, sink, 2), ContractViolation);
}

TEST(ProtocolTcp, ConnectsToListeningAgent) {
  const std::string cmd = agent_command("--agent random --listen 0");
  FILE* child = ::popen(cmd.c_str(), "r");
  ASSERT_NE(child, nullptr);
  char buf[32] = {};
  ASSERT_NE(std::fgets(buf, sizeof buf, child), nullptr);
  const std::string port = std::string(buf).substr(0, std::string(buf).find('\n'));
  {
    auto agent = protocol_agent_factory("tcp:127.0.0.1:" + port)(AgentContext{5, 1});
    EXPECT_EQ(agent->name(), "random");
    const ObservationSlots obs{sample_observation()};
    RandomAgent local(5);
    EXPECT_EQ(agent->choose_actions(obs), local.choose_actions(obs));
  }
  EXPECT_EQ(::pclose(child), 0);
}

TEST(ProtocolEndToEnd, LogsMatchInProcessAgent) {
  const fs::path root = oracle::temp_dir("proto_e2e");
  auto run = [&](AgentFactory factory, const std::string& name) {
    ExperimentConfig cfg;
    cfg.curriculum = CurriculumSource::fixed(tiny_curriculum());
    cfg.agent_factory = std::move(factory);
    cfg.agent_spec = name;
    cfg.num_lifetimes = 2;
    cfg.master_seed = 21;
    cfg.log_root = root;
    cfg.run_name = name;
    const ExperimentSummary s = run_experiment(cfg);
    EXPECT_TRUE(s.all_ok());
    return s.run_dir;
  };
  const fs::path local = run(builtin_agent_factory("tabular-q"), "local");
  const fs::path remote =
      run(protocol_agent_factory("exec:" + agent_command("--agent tabular-q")), "remote");
  for (const char* lifetime : {"lifetime_0", "lifetime_1"}) {
    const auto a = oracle::block_files(local / lifetime);
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, oracle::block_files(remote / lifetime)) << lifetime;
  }
  fs::remove_all(root);
}

namespace {

// Feeds `input` to run_agent_loop over pipes and returns its exit code plus
// whatever it wrote back.
std::pair<int, std::string> loop_on(const std::string& input) {
  int in[2];
  int out[2];
  EXPECT_EQ(::pipe(in), 0);
  EXPECT_EQ(::pipe(out), 0);
  EXPECT_EQ(::write(in[1], input.data(), input.size()), static_cast<ssize_t>(input.size()));
  ::close(in[1]);
  std::ostringstream diag;
  int code = 0;
  {
    FdTransport transport(in[0], out[1], true, "pipe");
    code = run_agent_loop(builtin_agent_factory("random"), transport, diag,
                          std::chrono::seconds(5));
  }
  std::string reply;
  char buf[4096];
  ssize_t n = 0;
  while ((n = ::read(out[0], buf, sizeof buf)) > 0) reply.append(buf, static_cast<std::size_t>(n));
  ::close(out[0]);
  return {code, reply};
}

}  // namespace

TEST(AgentLoop, HandshakeThenShutdown) {
  const auto [code, reply] = loop_on(
      "{\"type\":\"handshake\",\"seq\":1,\"version\":1,\"agent_seed\":3,\"num_envs\":1}\n"
      "{\"type\":\"shutdown\",\"seq\":2}\n");
  EXPECT_EQ(code, 0);
  const json ack = json::parse(reply.substr(0, reply.find('\n')));
  EXPECT_EQ(ack.at("type"), "handshake_ack");
  EXPECT_EQ(ack.at("seq"), 1);
  EXPECT_EQ(ack.at("agent_name"), "random");
}

TEST(AgentLoop, MalformedMessageIsAnError) {
  EXPECT_NE(loop_on("{not json\n").first, 0);
  EXPECT_NE(loop_on("{\"type\":\"dance\",\"seq\":1}\n").first, 0);
  EXPECT_NE(loop_on("").first, 0);
}
