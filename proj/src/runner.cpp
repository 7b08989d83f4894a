#include "harness/runner.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "harness/curriculum_io.hpp"
#include "harness/prng.hpp"
#include "harness/tasks.hpp"

namespace harness {

namespace fs = std::filesystem;

LifetimeContext LifetimeContext::derive(std::uint64_t master_seed, std::int64_t lifetime_index) {
  LifetimeContext ctx;
  ctx.lifetime_index = lifetime_index;
  ctx.lifetime_seed = prng_split(master_seed, static_cast<std::uint64_t>(lifetime_index));
  ctx.curriculum_seed = prng_split(ctx.lifetime_seed, 1);
  ctx.agent_seed = prng_split(ctx.lifetime_seed, 2);
  return ctx;
}

std::uint64_t LifetimeContext::variant_env_seed(std::int64_t ordinal) const {
  return prng_split(lifetime_seed, 3 + static_cast<std::uint64_t>(ordinal));
}

namespace {

struct Slot {
  std::optional<GridWorld> env;
  std::uint64_t seed = 0;
  bool in_flight = false;
  bool finished_this_round = false;
  Observation obs;
  std::int64_t steps = 0;
  double reward = 0.0;
};

// Keeps the live-environment gauge honest even when a variant aborts.
class EnvLease {
 public:
  EnvLease(LifetimeContext& ctx, std::int64_t n) : ctx_(ctx), n_(n) {
    ctx_.live_env_count += n_;
    ctx_.peak_live_env_count = std::max(ctx_.peak_live_env_count, ctx_.live_env_count);
  }
  ~EnvLease() { ctx_.live_env_count -= n_; }
  EnvLease(const EnvLease&) = delete;
  EnvLease& operator=(const EnvLease&) = delete;

 private:
  LifetimeContext& ctx_;
  std::int64_t n_;
};

void check_actions(const ActionSlots& actions, const ObservationSlots& observations) {
  if (actions.size() != observations.size()) {
    throw ContractViolation("choose_actions returned " + std::to_string(actions.size()) +
                            " entries for " + std::to_string(observations.size()) + " slots");
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const std::string slot = "slot " + std::to_string(i);
    if (!observations[i] && actions[i]) {
      throw ContractViolation("choose_actions returned an action for masked " + slot);
    }
    if (observations[i] && !actions[i]) {
      throw ContractViolation("choose_actions returned no action for active " + slot);
    }
    if (actions[i] && (*actions[i] < 0 || *actions[i] >= action::kCount)) {
      throw ContractViolation("choose_actions returned action " + std::to_string(*actions[i]) +
                              " for " + slot + "; expected [0, 6]");
    }
  }
}

}  // namespace

void run_task_variant(const TaskVariantSpec& spec, Agent& agent, std::int64_t num_envs,
                      LifetimeContext& ctx, EpisodeSink& sink, BlockPosition where,
                      bool hide_rewards) {
  if (num_envs < 1) throw std::invalid_argument("num_envs must be >= 1");
  const std::uint64_t variant_seed = ctx.variant_env_seed(ctx.next_variant_ordinal++);
  const auto k = static_cast<std::size_t>(num_envs);
  const std::int64_t limit = spec.limit.amount;
  const bool by_episodes = spec.limit.kind == LimitKind::Episodes;

  // Environments exist only while their variant runs.
  EnvLease lease(ctx, num_envs);
  std::vector<Slot> slots(k);
  for (std::size_t i = 0; i < k; ++i) {
    slots[i].seed = prng_split(variant_seed, i);
    slots[i].env.emplace(make_env(spec, slots[i].seed));
  }

  auto log_episode = [&](Slot& slot, bool truncated) {
    EpisodeRecord rec;
    rec.block_num = where.block_num;
    rec.block_type = where.block_type;
    rec.task_name = spec.task_name;
    rec.variant_name = spec.variant_name;
    rec.episode_id = ctx.next_episode_id++;
    rec.steps = slot.steps;
    rec.reward = slot.reward;
    rec.truncated = truncated;
    rec.env_seed = slot.seed;
    sink.append_episode(rec);
    slot.in_flight = false;
  };
  auto start_episode = [](Slot& slot) {
    slot.obs = slot.env->reset();
    slot.in_flight = true;
    slot.steps = 0;
    slot.reward = 0.0;
  };

  std::int64_t completed = 0;
  std::int64_t in_flight = 0;
  std::int64_t steps_taken = 0;
  ObservationSlots observations(k);
  TransitionSlots transitions(k);

  for (;;) {
    std::fill(observations.begin(), observations.end(), std::nullopt);
    if (by_episodes) {
      // A finished env is only reset while the episode budget is not yet
      // fully committed to completed or running episodes.
      for (Slot& slot : slots) {
        if (!slot.in_flight && completed + in_flight < limit) {
          start_episode(slot);
          ++in_flight;
        }
      }
      if (in_flight == 0) break;
      for (std::size_t i = 0; i < k; ++i) {
        if (slots[i].in_flight) observations[i] = slots[i].obs;
      }
    } else {
      const std::int64_t remaining = limit - steps_taken;
      if (remaining <= 0) break;
      const auto active = static_cast<std::size_t>(std::min<std::int64_t>(remaining, num_envs));
      for (std::size_t i = 0; i < active; ++i) {
        if (!slots[i].in_flight) start_episode(slots[i]);
        observations[i] = slots[i].obs;
      }
    }

    const ActionSlots actions = agent.choose_actions(observations);
    check_actions(actions, observations);

    std::fill(transitions.begin(), transitions.end(), std::nullopt);
    for (std::size_t i = 0; i < k; ++i) {
      if (!observations[i]) continue;
      Slot& slot = slots[i];
      const int act = *actions[i];
      StepResult res = slot.env->step(act);
      ++slot.steps;
      ++steps_taken;
      ++ctx.total_steps;
      slot.reward += res.reward;
      slot.finished_this_round = res.done;
      Transition t;
      t.observation = slot.obs;
      t.action = act;
      if (!hide_rewards) t.reward = res.reward;
      t.done = res.done;
      t.next_observation = res.observation;
      slot.obs = res.observation;
      transitions[i] = std::move(t);
    }

    agent.receive_transitions(transitions);

    for (std::size_t i = 0; i < k; ++i) {
      if (!observations[i] || !slots[i].finished_this_round) continue;
      slots[i].finished_this_round = false;
      log_episode(slots[i], false);
      ++completed;
      --in_flight;
    }
  }

  // Only the step limit can cut episodes off mid-flight.
  for (Slot& slot : slots) {
    if (slot.in_flight) log_episode(slot, true);
  }
}

void run_lifetime(const Curriculum& curriculum, Agent& agent, LifetimeContext& ctx,
                  EpisodeSink& sink, std::int64_t num_envs) {
  for (std::size_t b = 0; b < curriculum.blocks.size(); ++b) {
    const Block& block = curriculum.blocks[b];
    const bool learning = block.block_type == BlockType::Learn;
    const BlockPosition where{static_cast<std::int64_t>(b), block.block_type};
    agent.handle_event(BlockStart{learning});
    sink.begin_block(where.block_num, block.block_type);
    for (const TaskBlock& tb : block.task_blocks) {
      agent.handle_event(TaskStart{tb.task_name});
      for (const TaskVariantSpec& spec : tb.variants) {
        agent.handle_event(TaskVariantStart{spec.task_name, spec.variant_name, spec.limit});
        run_task_variant(spec, agent, num_envs, ctx, sink, where, !learning);
        agent.handle_event(TaskVariantEnd{});
      }
      agent.handle_event(TaskEnd{});
    }
    sink.end_block();
    agent.handle_event(BlockEnd{});
  }
}

CurriculumSource CurriculumSource::fixed(Curriculum c) {
  CurriculumSource src;
  src.name = c.name;
  src.description_json = curriculum_to_json(c).dump();
  src.make = [c = std::move(c)](std::uint64_t) { return c; };
  return src;
}

CurriculumSource CurriculumSource::condensed(std::int64_t episodes_per_lb,
                                             std::int64_t eval_episodes) {
  CurriculumSource src;
  src.name = "condensed";
  src.description_json = nlohmann::ordered_json{{"builtin", "condensed"},
                                                {"episodes_per_lb", episodes_per_lb},
                                                {"eval_episodes", eval_episodes}}
                             .dump();
  src.make = [=](std::uint64_t seed) {
    return generate_condensed(episodes_per_lb, eval_episodes, seed);
  };
  return src;
}

CurriculumSource CurriculumSource::dispersed(std::int64_t episodes_per_lb,
                                             std::int64_t eval_episodes) {
  CurriculumSource src;
  src.name = "dispersed";
  src.description_json = nlohmann::ordered_json{{"builtin", "dispersed"},
                                                {"episodes_per_lb", episodes_per_lb},
                                                {"eval_episodes", eval_episodes}}
                             .dump();
  src.make = [=](std::uint64_t seed) {
    return generate_dispersed(episodes_per_lb, eval_episodes, seed);
  };
  return src;
}

bool ExperimentSummary::all_ok() const {
  return std::all_of(lifetimes.begin(), lifetimes.end(),
                     [](const LifetimeSummary& l) { return l.ok; });
}

namespace {

class CountingSink final : public EpisodeSink {
 public:
  explicit CountingSink(EpisodeSink& inner) : inner_(inner) {}
  void begin_block(std::int64_t n, BlockType t) override { inner_.begin_block(n, t); }
  void append_episode(const EpisodeRecord& rec) override {
    inner_.append_episode(rec);
    ++episodes;
  }
  void end_block() override { inner_.end_block(); }

  std::int64_t episodes = 0;

 private:
  EpisodeSink& inner_;
};

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    out += keep ? c : '_';
  }
  return out.substr(0, 48);
}

fs::path choose_run_dir(const ExperimentConfig& cfg) {
  std::string base = cfg.run_name;
  if (base.empty()) {
    base = sanitize(cfg.curriculum.name) + "-" + sanitize(cfg.agent_spec) + "-seed" +
           std::to_string(cfg.master_seed);
  }
  fs::path dir = cfg.log_root / base;
  for (int n = 1; fs::exists(dir); ++n) dir = cfg.log_root / (base + "-" + std::to_string(n));
  return dir;
}

void write_run_metadata(const fs::path& run_dir, const ExperimentConfig& cfg,
                        const std::string& started_at, const std::string& finished_at,
                        const std::vector<LifetimeSummary>& lifetimes) {
  nlohmann::ordered_json j;
  j["run_name"] = run_dir.filename().string();
  j["harness_version"] = kHarnessVersion;
  j["curriculum"] = {{"name", cfg.curriculum.name},
                     {"source", nlohmann::ordered_json::parse(cfg.curriculum.description_json)}};
  j["agent"] = cfg.agent_spec;
  j["num_lifetimes"] = cfg.num_lifetimes;
  j["master_seed"] = cfg.master_seed;
  j["num_parallel_envs"] =
      cfg.num_parallel_envs ? nlohmann::ordered_json(*cfg.num_parallel_envs) : nullptr;
  j["log_root"] = cfg.log_root.string();
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  auto list = nlohmann::ordered_json::array();
  for (const auto& l : lifetimes) {
    list.push_back({{"index", l.index},
                    {"dir", l.dir.filename().string()},
                    {"status", l.ok ? "ok" : "failed"},
                    {"error", l.ok ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(l.error)},
                    {"episodes", l.episodes},
                    {"steps", l.steps}});
  }
  j["lifetimes"] = std::move(list);
  std::ofstream out(run_dir / "run_metadata.json", std::ios::binary | std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw LogWriteError((run_dir / "run_metadata.json").string() + ": write failed");
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  if (cfg.num_lifetimes < 1) throw std::invalid_argument("num_lifetimes must be >= 1");
  if (!cfg.agent_factory || !cfg.curriculum.make) {
    throw std::invalid_argument("experiment needs a curriculum source and an agent factory");
  }
  ExperimentSummary summary;
  summary.run_dir = choose_run_dir(cfg);
  std::error_code ec;
  fs::create_directories(summary.run_dir, ec);
  if (ec) throw LogWriteError(summary.run_dir.string() + ": " + ec.message());

  const std::string started_at = utc_timestamp();
  write_run_metadata(summary.run_dir, cfg, started_at, "", summary.lifetimes);

  for (std::int64_t i = 0; i < cfg.num_lifetimes; ++i) {
    LifetimeContext ctx = LifetimeContext::derive(cfg.master_seed, i);
    LifetimeSummary ls;
    ls.index = i;
    ls.dir = summary.run_dir / ("lifetime_" + std::to_string(i));

    LifetimeMetadata meta;
    meta.lifetime_index = i;
    meta.master_seed = cfg.master_seed;
    meta.lifetime_seed = ctx.lifetime_seed;
    meta.curriculum_seed = ctx.curriculum_seed;
    meta.agent_seed = ctx.agent_seed;
    meta.curriculum_name = cfg.curriculum.name;
    meta.agent_name = cfg.agent_spec;
    meta.started_at = utc_timestamp();

    std::optional<LifetimeLogWriter> writer;
    try {
      writer.emplace(ls.dir);
      const Curriculum curriculum = cfg.curriculum.make(ctx.curriculum_seed);
      if (const auto findings = validate_curriculum(curriculum); !findings.empty()) {
        throw CurriculumError("invalid curriculum: " + findings.front().path + ": " +
                              findings.front().message);
      }
      const std::int64_t num_envs = cfg.num_parallel_envs.value_or(curriculum.num_parallel_envs);
      auto agent = cfg.agent_factory(AgentContext{ctx.agent_seed, num_envs});
      meta.agent_name = agent->name();
      CountingSink sink(*writer);
      try {
        run_lifetime(curriculum, *agent, ctx, sink, num_envs);
      } catch (...) {
        ls.episodes = sink.episodes;
        throw;
      }
      ls.episodes = sink.episodes;
    } catch (const std::exception& e) {
      ls.ok = false;
      ls.error = e.what();
      meta.status = "failed";
      meta.error = ls.error;
      spdlog::error("lifetime {} failed: {}", i, ls.error);
      if (writer) {
        try {
          writer->end_block();
        } catch (const std::exception&) {
        }
      }
    }
    ls.steps = ctx.total_steps;
    ls.peak_live_envs = ctx.peak_live_env_count;
    meta.finished_at = utc_timestamp();
    if (writer) {
      try {
        writer->write_metadata(meta);
      } catch (const std::exception& e) {
        ls.ok = false;
        ls.error = e.what();
      }
    }
    spdlog::info("lifetime {}: {} ({} episodes, {} steps)", i, ls.ok ? "ok" : "failed",
                 ls.episodes, ls.steps);
    summary.lifetimes.push_back(std::move(ls));
  }

  write_run_metadata(summary.run_dir, cfg, started_at, utc_timestamp(), summary.lifetimes);
  return summary;
}

}  // namespace harness
