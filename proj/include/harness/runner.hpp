#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "harness/agent.hpp"
#include "harness/curriculum.hpp"
#include "harness/event_log.hpp"

namespace harness {

/// The agent broke the list-shape or masking contract.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeds and counters for one lifetime.
struct LifetimeContext {
  std::int64_t lifetime_index = 0;
  std::uint64_t lifetime_seed = 0;
  std::uint64_t curriculum_seed = 0;
  std::uint64_t agent_seed = 0;
  std::int64_t next_variant_ordinal = 0;
  std::int64_t next_episode_id = 0;
  std::int64_t live_env_count = 0;
  std::int64_t peak_live_env_count = 0;
  std::int64_t total_steps = 0;

  static LifetimeContext derive(std::uint64_t master_seed, std::int64_t lifetime_index);
  /// Seed shared by all slots of the j-th variant instantiation.
  std::uint64_t variant_env_seed(std::int64_t ordinal) const;
};

/// Where a task variant sits in the curriculum.
struct BlockPosition {
  std::int64_t block_num = 0;
  BlockType block_type = BlockType::Learn;
};

/// Runs one task variant over `num_envs` lockstep slots until its experience
/// limit is spent exactly.
void run_task_variant(const TaskVariantSpec& spec, Agent& agent, std::int64_t num_envs,
                      LifetimeContext& ctx, EpisodeSink& sink, BlockPosition where,
                      bool hide_rewards);

/// Walks blocks, task blocks and variants in order, delivering events.
void run_lifetime(const Curriculum& curriculum, Agent& agent, LifetimeContext& ctx,
                  EpisodeSink& sink, std::int64_t num_envs);

/// Produces the curriculum for a lifetime from its curriculum seed. Sources
/// loaded from files ignore the seed.
struct CurriculumSource {
  std::string name;
  std::function<Curriculum(std::uint64_t seed)> make;
  /// JSON description stored in run_metadata.json.
  std::string description_json = "null";

  static CurriculumSource fixed(Curriculum c);
  static CurriculumSource condensed(std::int64_t episodes_per_lb, std::int64_t eval_episodes);
  static CurriculumSource dispersed(std::int64_t episodes_per_lb, std::int64_t eval_episodes);
};

struct ExperimentConfig {
  CurriculumSource curriculum;
  AgentFactory agent_factory;
  std::string agent_spec;
  std::int64_t num_lifetimes = 1;
  std::uint64_t master_seed = 0;
  std::filesystem::path log_root;
  /// Generated from curriculum, agent and seed when empty.
  std::string run_name;
  std::optional<std::int64_t> num_parallel_envs;
};

struct LifetimeSummary {
  std::int64_t index = 0;
  std::filesystem::path dir;
  bool ok = true;
  std::string error;
  std::int64_t episodes = 0;
  std::int64_t steps = 0;
  std::int64_t peak_live_envs = 0;
};

struct ExperimentSummary {
  std::filesystem::path run_dir;
  std::vector<LifetimeSummary> lifetimes;

  bool all_ok() const;
};

/// Runs every lifetime in sequence with a fresh agent. A failing lifetime is
/// recorded and the rest still run.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

}  // namespace harness
