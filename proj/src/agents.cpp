#include "harness/agents.hpp"

#include <algorithm>
#include <stdexcept>

namespace harness {

const char* event_name(const AgentEvent& event) {
  struct Visitor {
    const char* operator()(const BlockStart&) const { return "block_start"; }
    const char* operator()(const BlockEnd&) const { return "block_end"; }
    const char* operator()(const TaskStart&) const { return "task_start"; }
    const char* operator()(const TaskEnd&) const { return "task_end"; }
    const char* operator()(const TaskVariantStart&) const { return "task_variant_start"; }
    const char* operator()(const TaskVariantEnd&) const { return "task_variant_end"; }
  };
  return std::visit(Visitor{}, event);
}

ActionSlots RandomAgent::choose_actions(std::span<const std::optional<Observation>> observations) {
  ActionSlots actions(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (observations[i]) actions[i] = static_cast<int>(rng_.below(action::kCount));
  }
  return actions;
}

std::uint64_t observation_hash(const Observation& obs) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  for (std::uint8_t b : obs.view) mix(b);
  mix(obs.carried_type);
  mix(obs.carried_color);
  return h;
}

TabularQAgent::TabularQAgent(std::uint64_t seed, TabularQConfig config)
    : config_(config), rng_(seed) {}

double TabularQAgent::epsilon() const {
  if (learn_steps_ >= config_.anneal_steps) return config_.epsilon_end;
  const double progress =
      static_cast<double>(learn_steps_) / static_cast<double>(config_.anneal_steps);
  return config_.epsilon_start + (config_.epsilon_end - config_.epsilon_start) * progress;
}

TabularQAgent::QRow TabularQAgent::q_values(const Observation& obs) const {
  const auto it = q_.find(observation_hash(obs));
  return it == q_.end() ? QRow{} : it->second;
}

int TabularQAgent::greedy_action(const Observation& obs) const {
  const QRow row = q_values(obs);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

ActionSlots TabularQAgent::choose_actions(std::span<const std::optional<Observation>> observations) {
  ActionSlots actions(observations.size());
  const double eps = epsilon();
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (!observations[i]) continue;
    if (rng_.uniform() < eps) {
      actions[i] = static_cast<int>(rng_.below(action::kCount));
      continue;
    }
    // Uniform tie-break among the best actions.
    const QRow row = q_values(*observations[i]);
    const double best = *std::max_element(row.begin(), row.end());
    std::array<int, action::kCount> ties{};
    std::uint32_t n = 0;
    for (int a = 0; a < action::kCount; ++a) {
      if (row[static_cast<std::size_t>(a)] == best) ties[n++] = a;
    }
    actions[i] = n == 1 ? ties[0] : ties[rng_.below(n)];
  }
  return actions;
}

void TabularQAgent::receive_transitions(std::span<const std::optional<Transition>> transitions) {
  if (!learning_allowed_) return;
  for (const auto& slot : transitions) {
    if (!slot || !slot->reward) continue;
    const Transition& t = *slot;
    double bootstrap = 0.0;
    if (!t.done) {
      const QRow next = q_values(t.next_observation);
      bootstrap = *std::max_element(next.begin(), next.end());
    }
    double& q = q_[observation_hash(t.observation)][static_cast<std::size_t>(t.action)];
    q += config_.alpha * (*t.reward + config_.gamma * bootstrap - q);
    ++learn_steps_;
  }
}

void TabularQAgent::handle_event(const AgentEvent& event) {
  if (const auto* start = std::get_if<BlockStart>(&event)) {
    learning_allowed_ = start->is_learning_allowed;
  }
}

bool is_builtin_agent(const std::string& name) { return name == "random" || name == "tabular-q"; }

AgentFactory builtin_agent_factory(const std::string& name) {
  if (name == "random") {
    return [](const AgentContext& ctx) { return std::make_unique<RandomAgent>(ctx.agent_seed); };
  }
  if (name == "tabular-q") {
    return [](const AgentContext& ctx) { return std::make_unique<TabularQAgent>(ctx.agent_seed); };
  }
  throw std::invalid_argument("unknown built-in agent: " + name);
}

}  // namespace harness
