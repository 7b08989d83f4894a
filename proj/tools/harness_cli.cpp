// Command-line front end: run, ste, metrics, validate, export-curriculum,
// curve-data and show-layout.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "harness/agents.hpp"
#include "harness/curriculum.hpp"
#include "harness/curriculum_io.hpp"
#include "harness/event_log.hpp"
#include "harness/metrics.hpp"
#include "harness/protocol.hpp"
#include "harness/runner.hpp"
#include "harness/tasks.hpp"

namespace fs = std::filesystem;
using namespace harness;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("harness");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("HARNESS_LOG_LEVEL");
  const std::string level = env != nullptr ? env : "warn";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::warn);
    spdlog::warn("ignoring HARNESS_LOG_LEVEL={} (expected error, warn, info or debug)", level);
  }
}

AgentFactory resolve_agent(const std::string& spec, double timeout_s) {
  if (is_builtin_agent(spec)) return builtin_agent_factory(spec);
  if (spec.rfind("exec:", 0) == 0 || spec.rfind("tcp:", 0) == 0) {
    protocol::ProtocolOptions options;
    options.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0));
    return protocol::protocol_agent_factory(spec, options);
  }
  throw UsageError("unknown agent '" + spec + "' (expected random, tabular-q, exec:CMD or tcp:HOST:PORT)");
}

CurriculumSource resolve_curriculum(const std::string& name, std::int64_t train_episodes,
                                    std::int64_t eval_episodes) {
  if (name == "condensed") return CurriculumSource::condensed(train_episodes, eval_episodes);
  if (name == "dispersed") return CurriculumSource::dispersed(train_episodes, eval_episodes);
  if (!fs::exists(name)) {
    throw UsageError("unknown curriculum '" + name + "' (expected condensed, dispersed or a file)");
  }
  Curriculum c = load_curriculum_file(name);
  const auto findings = validate_curriculum(c);
  if (!findings.empty()) {
    std::string msg = name + ": curriculum is invalid:";
    for (const auto& f : findings) msg += "\n  " + f.path + ": " + f.message;
    throw UsageError(msg);
  }
  return CurriculumSource::fixed(std::move(c));
}

void check_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw UsageError("cannot create log directory " + dir.string() +
                     (ec ? ": " + ec.message() : std::string()));
  }
  const fs::path probe = dir / ".harness_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw UsageError("log directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

int report_summary(const ExperimentSummary& summary) {
  std::cout << summary.run_dir.string() << "\n";
  for (const auto& l : summary.lifetimes) {
    std::cout << "lifetime_" << l.index << ": " << (l.ok ? "ok" : "failed") << " (" << l.episodes
              << " episodes, " << l.steps << " steps)";
    if (!l.ok) std::cout << ": " << l.error;
    std::cout << "\n";
  }
  return summary.all_ok() ? 0 : kExitFailed;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw UsageError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Continual reinforcement-learning experiment harness"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment over one or more lifetimes");
  std::string run_curriculum;
  std::string run_agent;
  std::int64_t run_lifetimes = 1;
  std::uint64_t run_seed = 0;
  std::string run_log_dir;
  std::optional<std::int64_t> run_parallel;
  std::int64_t run_train = kDefaultLearnEpisodes;
  std::int64_t run_eval = kDefaultEvalEpisodes;
  std::string run_name;
  double run_timeout = 60.0;
  run->add_option("--curriculum", run_curriculum, "condensed, dispersed or a curriculum JSON file")
      ->required();
  run->add_option("--agent", run_agent, "random, tabular-q, exec:COMMAND or tcp:HOST:PORT")
      ->required();
  run->add_option("--lifetimes", run_lifetimes, "Number of lifetimes")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed, "Master seed");
  run->add_option("--log-dir", run_log_dir, "Root directory for logs")->required();
  run->add_option("--parallel-envs", run_parallel, "Override num_parallel_envs")
      ->check(CLI::PositiveNumber);
  run->add_option("--train-episodes", run_train,
                  "Episodes per variant in each condensed learning block")
      ->check(CLI::PositiveNumber);
  run->add_option("--eval-episodes", run_eval, "Episodes per variant in each evaluation block")
      ->check(CLI::PositiveNumber);
  run->add_option("--run-name", run_name, "Run directory name (default derived from flags)");
  run->add_option("--timeout", run_timeout, "Protocol reply timeout in seconds")
      ->check(CLI::PositiveNumber);

  // ste
  auto* ste = app.add_subcommand("ste", "Train a single-task expert and store its log");
  std::string ste_task;
  std::string ste_agent;
  std::int64_t ste_episodes = kDefaultLearnEpisodes;
  std::uint64_t ste_seed = 0;
  std::string ste_dir;
  std::int64_t ste_lifetimes = 1;
  std::optional<std::int64_t> ste_parallel;
  bool ste_fixed = false;
  double ste_timeout = 60.0;
  ste->add_option("--task", ste_task, "Task family name")->required();
  ste->add_option("--agent", ste_agent, "random, tabular-q, exec:COMMAND or tcp:HOST:PORT")
      ->required();
  ste->add_option("--episodes", ste_episodes, "Training episodes per variant")
      ->check(CLI::PositiveNumber);
  ste->add_option("--seed", ste_seed, "Master seed");
  ste->add_option("--ste-dir", ste_dir, "Single-task expert store root")->required();
  ste->add_option("--lifetimes", ste_lifetimes, "Number of lifetimes")->check(CLI::PositiveNumber);
  ste->add_option("--parallel-envs", ste_parallel, "Parallel environments")
      ->check(CLI::PositiveNumber);
  ste->add_flag("--fixed-layout", ste_fixed, "Reuse one layout per environment");
  ste->add_option("--timeout", ste_timeout, "Protocol reply timeout in seconds")
      ->check(CLI::PositiveNumber);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compute lifelong-learning metrics from logs");
  std::string metrics_log_dir;
  std::string metrics_ste_dir;
  std::string metrics_out;
  metrics->add_option("--log-dir", metrics_log_dir, "Run directory or lifetime directory")
      ->required();
  metrics->add_option("--ste-dir", metrics_ste_dir, "Single-task expert store");
  metrics->add_option("--out", metrics_out, "Output directory for report.json and report.csv")
      ->required();

  // validate
  auto* validate = app.add_subcommand("validate", "Check a curriculum file");
  std::string validate_file;
  validate->add_option("file", validate_file, "Curriculum JSON file")->required();

  // export-curriculum
  auto* exporter = app.add_subcommand("export-curriculum", "Write a built-in curriculum as JSON");
  std::string export_name;
  std::uint64_t export_seed = 0;
  std::string export_out;
  std::int64_t export_train = kDefaultLearnEpisodes;
  std::int64_t export_eval = kDefaultEvalEpisodes;
  exporter->add_option("--name", export_name, "condensed or dispersed")
      ->required()
      ->check(CLI::IsMember({"condensed", "dispersed"}));
  exporter->add_option("--seed", export_seed, "Curriculum seed");
  exporter->add_option("--out", export_out, "Output file")->required();
  exporter->add_option("--train-episodes", export_train, "Condensed learning-block episodes")
      ->check(CLI::PositiveNumber);
  exporter->add_option("--eval-episodes", export_eval, "Evaluation episodes per variant")
      ->check(CLI::PositiveNumber);

  // curve-data
  auto* curves = app.add_subcommand("curve-data", "Emit eval performance per block as CSV");
  std::string curves_log_dir;
  std::string curves_out;
  curves->add_option("--log-dir", curves_log_dir, "Run directory or lifetime directory")
      ->required();
  curves->add_option("--out", curves_out, "Output CSV")->required();

  // show-layout
  auto* layout = app.add_subcommand("show-layout", "Print the ASCII layout of a task variant");
  std::string layout_task;
  std::string layout_variant = "small";
  std::uint64_t layout_seed = 0;
  layout->add_option("--task", layout_task, "Task family name")->required();
  layout->add_option("--variant", layout_variant, "Variant name");
  layout->add_option("--seed", layout_seed, "Environment seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) {
      check_writable_dir(run_log_dir);
      ExperimentConfig cfg;
      cfg.curriculum = resolve_curriculum(run_curriculum, run_train, run_eval);
      cfg.agent_factory = resolve_agent(run_agent, run_timeout);
      cfg.agent_spec = run_agent;
      cfg.num_lifetimes = run_lifetimes;
      cfg.master_seed = run_seed;
      cfg.log_root = run_log_dir;
      cfg.run_name = run_name;
      cfg.num_parallel_envs = run_parallel;
      return report_summary(run_experiment(cfg));
    }

    if (*ste) {
      const TaskDefinition* def = TaskRegistry::instance().find(ste_task);
      if (def == nullptr) throw UsageError("unknown task '" + ste_task + "'");
      Block learn{BlockType::Learn, {TaskBlock{ste_task, {}}}};
      for (const auto& [variant, params] : def->variants) {
        learn.task_blocks[0].variants.push_back(TaskVariantSpec{
            ste_task, variant, params, ExperienceLimit::episodes(ste_episodes), ste_fixed});
      }
      Curriculum c{"ste-" + ste_task, {learn}, 1, std::nullopt};
      const fs::path root = fs::path(ste_dir) / ste_task;
      check_writable_dir(root);
      ExperimentConfig cfg;
      cfg.curriculum = CurriculumSource::fixed(std::move(c));
      cfg.agent_factory = resolve_agent(ste_agent, ste_timeout);
      cfg.agent_spec = ste_agent;
      cfg.num_lifetimes = ste_lifetimes;
      cfg.master_seed = ste_seed;
      cfg.log_root = root;
      cfg.num_parallel_envs = ste_parallel;
      return report_summary(run_experiment(cfg));
    }

    if (*metrics) {
      std::optional<STEStore> store;
      if (!metrics_ste_dir.empty()) store = STEStore::load(metrics_ste_dir);
      const MetricsReport report = compute_metrics(metrics_log_dir, store ? &*store : nullptr);
      const fs::path out(metrics_out);
      write_text(out / "report.json", report_to_json(report));
      write_text(out / "report.csv", report_to_csv(report));
      std::cout << (out / "report.json").string() << "\n" << (out / "report.csv").string() << "\n";
      return 0;
    }

    if (*validate) {
      Curriculum c;
      try {
        c = load_curriculum_file(validate_file);
      } catch (const CurriculumFileError& e) {
        std::cout << e.what() << "\n";
        return kExitUsage;
      }
      const auto findings = validate_curriculum(c);
      for (const auto& f : findings) {
        std::cout << f.path << ": [" << f.rule << "] " << f.message << "\n";
      }
      if (findings.empty()) std::cout << validate_file << ": ok\n";
      return findings.empty() ? 0 : kExitFailed;
    }

    if (*exporter) {
      const Curriculum c = export_name == "condensed"
                               ? generate_condensed(export_train, export_eval, export_seed)
                               : generate_dispersed(export_train, export_eval, export_seed);
      save_curriculum_file(c, export_out);
      return 0;
    }

    if (*curves) {
      write_text(curves_out, curve_data_csv(curves_log_dir));
      return 0;
    }

    if (*layout) {
      const TaskDefinition* def = TaskRegistry::instance().find(layout_task);
      if (def == nullptr) throw UsageError("unknown task '" + layout_task + "'");
      const TaskParams* params = def->find_variant(layout_variant);
      if (params == nullptr) {
        throw UsageError("task " + layout_task + " has no variant '" + layout_variant + "'");
      }
      const TaskVariantSpec spec{layout_task, layout_variant, *params, ExperienceLimit::episodes(1),
                                 false};
      GridWorld env = make_env(spec, layout_seed);
      env.reset();
      std::cout << env.render();
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
