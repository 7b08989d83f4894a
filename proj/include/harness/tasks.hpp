#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "harness/curriculum.hpp"
#include "harness/gridworld.hpp"

namespace harness {

/// Shape of the action and observation spaces a task exposes. Every variant
/// in a curriculum must agree on it.
struct SpaceDescriptor {
  int num_actions = action::kCount;
  std::array<int, 3> view_shape{Observation::kViewSize, Observation::kViewSize,
                                Observation::kChannels};

  bool operator==(const SpaceDescriptor&) const = default;
};

struct ParamBound {
  std::string name;
  std::int64_t min = 0;
  std::int64_t max = 0;
};

struct TaskDefinition {
  std::string name;
  std::vector<ParamBound> bounds;
  /// Named default variants, in presentation order.
  std::vector<std::pair<std::string, TaskParams>> variants;
  SpaceDescriptor spaces;
  /// Constraints spanning several parameters; returns a message on failure.
  std::function<std::optional<std::string>(const TaskParams&)> cross_check;
  std::function<GridWorldConfig(const TaskParams&)> configure;

  const TaskParams* find_variant(const std::string& variant_name) const;
};

class EnvConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Process-wide table of task families. The six built-in tasks are
/// registered on first use; tests may add more.
class TaskRegistry {
 public:
  static TaskRegistry& instance();

  const TaskDefinition* find(const std::string& name) const;
  const std::vector<TaskDefinition>& tasks() const { return tasks_; }
  /// Replaces an existing definition with the same name.
  void add(TaskDefinition def);
  /// Only the built-in tasks take part in generated curricula.
  std::size_t builtin_count() const { return builtin_count_; }

 private:
  TaskRegistry();

  std::vector<TaskDefinition> tasks_;
  std::size_t builtin_count_ = 0;
};

/// Returns a message naming the first offending parameter, if any.
std::optional<std::string> check_params(const TaskDefinition& def, const TaskParams& params);

/// Builds the environment for a task variant. Throws EnvConstructionError
/// for unknown tasks or out-of-bounds parameters.
GridWorld make_env(const TaskVariantSpec& spec, std::uint64_t env_seed);

}  // namespace harness
