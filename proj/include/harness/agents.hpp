#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>

#include "harness/agent.hpp"
#include "harness/prng.hpp"

namespace harness {

/// Uniform random actions from a seeded PCG32 stream.
class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}

  std::string name() const override { return "random"; }
  ActionSlots choose_actions(std::span<const std::optional<Observation>> observations) override;
  void receive_transitions(std::span<const std::optional<Transition>>) override {}

 private:
  Pcg32 rng_;
};

/// 64-bit FNV-1a over the view bytes followed by carried type and color.
std::uint64_t observation_hash(const Observation& obs);

struct TabularQConfig {
  double alpha = 0.1;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t anneal_steps = 50'000;
};

/// Epsilon-greedy tabular Q-learning keyed by observation hash. Learns only
/// inside blocks that allow learning and ignores reward-less transitions.
class TabularQAgent final : public Agent {
 public:
  using QRow = std::array<double, action::kCount>;
  using QTable = std::unordered_map<std::uint64_t, QRow>;

  explicit TabularQAgent(std::uint64_t seed, TabularQConfig config = {});

  std::string name() const override { return "tabular-q"; }
  ActionSlots choose_actions(std::span<const std::optional<Observation>> observations) override;
  void receive_transitions(std::span<const std::optional<Transition>> transitions) override;
  void handle_event(const AgentEvent& event) override;

  double epsilon() const;
  /// Lowest-index action among the maximal Q-values.
  int greedy_action(const Observation& obs) const;
  QRow q_values(const Observation& obs) const;
  const QTable& q_table() const { return q_; }
  std::int64_t learn_steps() const { return learn_steps_; }
  bool learning_allowed() const { return learning_allowed_; }

 private:
  TabularQConfig config_;
  Pcg32 rng_;
  QTable q_;
  std::int64_t learn_steps_ = 0;
  bool learning_allowed_ = false;
};

/// Built-in agent names: "random", "tabular-q".
bool is_builtin_agent(const std::string& name);
AgentFactory builtin_agent_factory(const std::string& name);

}  // namespace harness
