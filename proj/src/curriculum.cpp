#include "harness/curriculum.hpp"

#include <span>

#include "harness/prng.hpp"
#include "harness/tasks.hpp"

namespace harness {

const char* to_string(BlockType t) { return t == BlockType::Learn ? "learn" : "eval"; }

const char* to_string(LimitKind k) { return k == LimitKind::Episodes ? "episodes" : "steps"; }

std::vector<ValidationFinding> validate_curriculum(const Curriculum& c) {
  std::vector<ValidationFinding> findings;
  auto report = [&findings](std::string path, std::string rule, std::string message) {
    findings.push_back({std::move(path), std::move(rule), std::move(message)});
  };

  if (c.num_parallel_envs < 1) {
    report("num_parallel_envs", "positive", "must be >= 1");
  }
  if (c.blocks.empty()) {
    report("blocks", "non-empty", "curriculum has no blocks");
  }

  const auto& registry = TaskRegistry::instance();
  std::optional<SpaceDescriptor> reference_space;
  std::string reference_path;

  for (std::size_t b = 0; b < c.blocks.size(); ++b) {
    const Block& block = c.blocks[b];
    const std::string block_path = "blocks[" + std::to_string(b) + "]";
    if (block.task_blocks.empty()) {
      report(block_path, "non-empty", "block has no task blocks");
    }
    for (std::size_t t = 0; t < block.task_blocks.size(); ++t) {
      const TaskBlock& tb = block.task_blocks[t];
      const std::string tb_path = block_path + ".task_blocks[" + std::to_string(t) + "]";
      if (tb.variants.empty()) {
        report(tb_path, "non-empty", "task block has no variants");
      }
      for (std::size_t v = 0; v < tb.variants.size(); ++v) {
        const TaskVariantSpec& spec = tb.variants[v];
        const std::string path = tb_path + ".variants[" + std::to_string(v) + "]";
        if (spec.task_name != tb.task_name) {
          report(path, "task-name-match",
                 "variant task '" + spec.task_name + "' differs from task block '" +
                     tb.task_name + "'");
        }
        if (spec.limit.amount < 1) {
          report(path + ".limit", "positive", "limit amount must be >= 1");
        }
        const TaskDefinition* def = registry.find(spec.task_name);
        if (def == nullptr) {
          report(path, "resolvable", "unknown task '" + spec.task_name + "'");
          continue;
        }
        if (def->find_variant(spec.variant_name) == nullptr) {
          report(path, "resolvable",
                 "unknown variant '" + spec.variant_name + "' of task '" + spec.task_name + "'");
        }
        if (auto problem = check_params(*def, spec.params)) {
          report(path + ".params", "param-bounds", *problem);
        }
        if (!reference_space) {
          reference_space = def->spaces;
          reference_path = path;
        } else if (!(def->spaces == *reference_space)) {
          report(path, "space-mismatch",
                 "action/observation spaces differ from " + reference_path);
        }
      }
    }
  }
  return findings;
}

Curriculum generate_interleaved(const std::vector<Block>& learn_blocks, const Block& eval_block,
                                std::string name) {
  if (learn_blocks.empty()) throw CurriculumError("no learning content");
  if (eval_block.block_type != BlockType::Eval) {
    throw CurriculumError("interleaved evaluation block must have type eval");
  }
  Curriculum c;
  c.name = std::move(name);
  c.blocks.reserve(2 * learn_blocks.size() + 1);
  c.blocks.push_back(eval_block);
  for (const Block& lb : learn_blocks) {
    if (lb.block_type != BlockType::Learn) {
      throw CurriculumError("interleaved learning blocks must have type learn");
    }
    c.blocks.push_back(lb);
    c.blocks.push_back(eval_block);
  }
  return c;
}

std::vector<TaskVariantSpec> default_variants(ExperienceLimit limit) {
  const auto& registry = TaskRegistry::instance();
  std::vector<TaskVariantSpec> out;
  for (std::size_t i = 0; i < registry.builtin_count(); ++i) {
    const TaskDefinition& def = registry.tasks()[i];
    for (const auto& [variant, params] : def.variants) {
      out.push_back({def.name, variant, params, limit, false});
    }
  }
  return out;
}

Block full_eval_block(std::int64_t eval_episodes) {
  Block eval{BlockType::Eval, {}};
  for (auto& spec : default_variants(ExperienceLimit::episodes(eval_episodes))) {
    if (eval.task_blocks.empty() || eval.task_blocks.back().task_name != spec.task_name) {
      eval.task_blocks.push_back({spec.task_name, {}});
    }
    eval.task_blocks.back().variants.push_back(std::move(spec));
  }
  return eval;
}

namespace {

Block single_variant_block(TaskVariantSpec spec) {
  TaskBlock tb{spec.task_name, {std::move(spec)}};
  return Block{BlockType::Learn, {std::move(tb)}};
}

void check_budgets(std::int64_t episodes_per_lb, std::int64_t eval_episodes) {
  if (episodes_per_lb < 1 || eval_episodes < 1) {
    throw CurriculumError("episode budgets must be positive");
  }
}

}  // namespace

Curriculum generate_condensed(std::int64_t episodes_per_lb, std::int64_t eval_episodes,
                              std::uint64_t seed) {
  check_budgets(episodes_per_lb, eval_episodes);
  auto variants = default_variants(ExperienceLimit::episodes(episodes_per_lb));
  Pcg32 rng(seed);
  fisher_yates(std::span<TaskVariantSpec>(variants), rng);

  std::vector<Block> learn;
  learn.reserve(variants.size());
  for (auto& spec : variants) learn.push_back(single_variant_block(std::move(spec)));
  Curriculum c = generate_interleaved(learn, full_eval_block(eval_episodes), "condensed");
  c.order_seed = seed;
  return c;
}

Curriculum generate_dispersed(std::int64_t episodes_per_lb, std::int64_t eval_episodes,
                              std::uint64_t seed) {
  check_budgets(episodes_per_lb, eval_episodes);
  const std::int64_t short_lb = (episodes_per_lb + 2) / 3;
  const auto canonical = default_variants(ExperienceLimit::episodes(short_lb));
  Pcg32 rng(seed);

  std::vector<Block> learn;
  learn.reserve(3 * canonical.size());
  for (int superblock = 0; superblock < 3; ++superblock) {
    auto order = canonical;
    fisher_yates(std::span<TaskVariantSpec>(order), rng);
    for (auto& spec : order) learn.push_back(single_variant_block(std::move(spec)));
  }
  Curriculum c = generate_interleaved(learn, full_eval_block(eval_episodes), "dispersed");
  c.order_seed = seed;
  return c;
}

}  // namespace harness
