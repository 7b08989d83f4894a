#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace harness {

enum class LimitKind { Episodes, Steps };

/// Cap on the experience an agent may collect in one task variant.
struct ExperienceLimit {
  LimitKind kind = LimitKind::Episodes;
  std::int64_t amount = 1;

  static ExperienceLimit episodes(std::int64_t n) { return {LimitKind::Episodes, n}; }
  static ExperienceLimit steps(std::int64_t n) { return {LimitKind::Steps, n}; }

  bool operator==(const ExperienceLimit&) const = default;
};

using TaskParams = std::map<std::string, std::int64_t>;

struct TaskVariantSpec {
  std::string task_name;
  std::string variant_name;
  TaskParams params;
  ExperienceLimit limit;
  bool fixed_layout = false;

  bool operator==(const TaskVariantSpec&) const = default;
};

struct TaskBlock {
  std::string task_name;
  std::vector<TaskVariantSpec> variants;

  bool operator==(const TaskBlock&) const = default;
};

enum class BlockType { Learn, Eval };

struct Block {
  BlockType block_type = BlockType::Learn;
  std::vector<TaskBlock> task_blocks;

  bool operator==(const Block&) const = default;
};

struct Curriculum {
  std::string name;
  std::vector<Block> blocks;
  std::int64_t num_parallel_envs = 1;
  std::optional<std::uint64_t> order_seed;

  bool operator==(const Curriculum&) const = default;
};

const char* to_string(BlockType t);
const char* to_string(LimitKind k);

/// One violated rule, located by a dotted path such as
/// `blocks[2].task_blocks[0].variants[1]`.
struct ValidationFinding {
  std::string path;
  std::string rule;
  std::string message;
};

std::vector<ValidationFinding> validate_curriculum(const Curriculum& c);

class CurriculumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Built-in experience budgets for the generated curricula.
inline constexpr std::int64_t kDefaultLearnEpisodes = 300;
inline constexpr std::int64_t kDefaultEvalEpisodes = 20;

/// [E, L1, E, L2, ..., Ln, E]. Throws CurriculumError on empty input or
/// mismatched block types.
Curriculum generate_interleaved(const std::vector<Block>& learn_blocks, const Block& eval_block,
                                std::string name = "interleaved");

/// Every registered default variant, in registry order.
std::vector<TaskVariantSpec> default_variants(ExperienceLimit limit);

/// Eval block covering all default variants, one task block per task.
Block full_eval_block(std::int64_t eval_episodes);

/// Each variant trained exactly once, one variant per learning block.
Curriculum generate_condensed(std::int64_t episodes_per_lb, std::int64_t eval_episodes,
                              std::uint64_t seed);

/// Three superblocks, each a fresh permutation of all variants, with
/// learning blocks ceil(episodes_per_lb / 3) episodes long.
Curriculum generate_dispersed(std::int64_t episodes_per_lb, std::int64_t eval_episodes,
                              std::uint64_t seed);

}  // namespace harness
