#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "harness/curriculum.hpp"
#include "harness/gridworld.hpp"

namespace harness {

/// (observation, action, reward, done, next_observation). The reward is
/// absent while the enclosing block is an evaluation block.
struct Transition {
  Observation observation;
  int action = 0;
  std::optional<double> reward;
  bool done = false;
  Observation next_observation;

  bool operator==(const Transition&) const = default;
};

struct BlockStart {
  bool is_learning_allowed = false;
  bool operator==(const BlockStart&) const = default;
};
struct BlockEnd {
  bool operator==(const BlockEnd&) const = default;
};
struct TaskStart {
  std::string task_name;
  bool operator==(const TaskStart&) const = default;
};
struct TaskEnd {
  bool operator==(const TaskEnd&) const = default;
};
struct TaskVariantStart {
  std::string task_name;
  std::string variant_name;
  ExperienceLimit limit;
  bool operator==(const TaskVariantStart&) const = default;
};
struct TaskVariantEnd {
  bool operator==(const TaskVariantEnd&) const = default;
};

using AgentEvent =
    std::variant<BlockStart, BlockEnd, TaskStart, TaskEnd, TaskVariantStart, TaskVariantEnd>;

/// snake_case event name, also used on the wire.
const char* event_name(const AgentEvent& event);

using ObservationSlots = std::vector<std::optional<Observation>>;
using ActionSlots = std::vector<std::optional<int>>;
using TransitionSlots = std::vector<std::optional<Transition>>;

/// Contract every evaluated agent implements. Slot i of each list belongs to
/// parallel environment i; an absent entry marks a masked slot, and the agent
/// must answer a masked observation with an absent action.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string name() const = 0;
  virtual ActionSlots choose_actions(std::span<const std::optional<Observation>> observations) = 0;
  virtual void receive_transitions(std::span<const std::optional<Transition>> transitions) = 0;
  virtual void handle_event(const AgentEvent& event) { (void)event; }
};

struct AgentContext {
  std::uint64_t agent_seed = 0;
  std::int64_t num_envs = 1;
};

using AgentFactory = std::function<std::unique_ptr<Agent>(const AgentContext&)>;

}  // namespace harness
