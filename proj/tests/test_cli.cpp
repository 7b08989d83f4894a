#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "harness/curriculum_io.hpp"
#include "harness/metrics.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

oracle::CommandResult harness_cli(const std::string& args) {
  return oracle::run_command(std::string(HARNESS_BIN) + " " + args);
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = oracle::temp_dir("cli"); }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& rel) const { return oracle::quote((dir_ / rel).string()); }
  fs::path dir_;
};

const char* kSmallRun =
    "run --curriculum condensed --agent random --lifetimes 2 --seed 7 --train-episodes 2 "
    "--eval-episodes 1";

}  // namespace

TEST_F(CliTest, HelpListsSubcommandsAndFlags) {
  const auto top = harness_cli("--help");
  EXPECT_EQ(top.exit_code, 0);
  for (const char* sub : {"run", "ste", "metrics", "validate", "export-curriculum", "curve-data",
                          "show-layout"}) {
    EXPECT_NE(top.output.find(sub), std::string::npos) << sub;
  }
  const auto run = harness_cli("run --help");
  for (const char* flag : {"--curriculum", "--agent", "--lifetimes", "--seed", "--log-dir",
                           "--parallel-envs"}) {
    EXPECT_NE(run.output.find(flag), std::string::npos) << flag;
  }
}

TEST_F(CliTest, RunIsDeterministic) {
  const auto a = harness_cli(std::string(kSmallRun) + " --log-dir " + path("a"));
  const auto b = harness_cli(std::string(kSmallRun) + " --log-dir " + path("b"));
  ASSERT_EQ(a.exit_code, 0) << a.output;
  ASSERT_EQ(b.exit_code, 0) << b.output;
  EXPECT_NE(a.output.find("lifetime_0: ok"), std::string::npos) << a.output;
  EXPECT_NE(a.output.find("lifetime_1: ok"), std::string::npos) << a.output;
  const fs::path run_a = dir_ / "a" / "condensed-random-seed7";
  const fs::path run_b = dir_ / "b" / "condensed-random-seed7";
  ASSERT_TRUE(fs::exists(run_a / "run_metadata.json"));
  for (const char* lifetime : {"lifetime_0", "lifetime_1"}) {
    const auto blocks = oracle::block_files(run_a / lifetime);
    EXPECT_EQ(blocks.size(), 37U);
    EXPECT_EQ(blocks, oracle::block_files(run_b / lifetime));
  }
  EXPECT_NE(oracle::block_files(run_a / "lifetime_0"), oracle::block_files(run_a / "lifetime_1"));

  const auto again = harness_cli(std::string(kSmallRun) + " --log-dir " + path("a"));
  ASSERT_EQ(again.exit_code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "condensed-random-seed7-1"));
}

TEST_F(CliTest, MetricsWithoutExpertStore) {
  oracle::write_lifetime(dir_ / "run" / "lifetime_0", oracle::fixture_episodes());
  const auto r = harness_cli("metrics --log-dir " + path("run") + " --out " + path("out"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const json report = json::parse(oracle::slurp(dir_ / "out" / "report.json"));
  const json& m = report["lifetimes"][0]["metrics"];
  EXPECT_DOUBLE_EQ(m["pm"]["value"].get<double>(), -0.2);
  EXPECT_TRUE(m["rp"]["value"].is_null());
  EXPECT_TRUE(m["se"]["value"].is_null());
  EXPECT_FALSE(m["rp"]["notes"].empty());
  const std::string csv = oracle::slurp(dir_ / "out" / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lifetime,pm,mtp,mep,ft,bt,rp,se");
  EXPECT_EQ(count_lines(csv), 3U);
}

TEST_F(CliTest, MetricsWithExpertStore) {
  const auto eps = oracle::fixture_episodes({0.2, 0.4, 0.9}, {0.1, 0.7});
  oracle::write_lifetime(dir_ / "run" / "lifetime_0", eps);
  for (const char* task : {"A", "B"}) {
    std::vector<harness::EpisodeRecord> learn;
    for (const auto& e : eps) {
      if (e.block_type == harness::BlockType::Learn && e.task_name == task) learn.push_back(e);
    }
    oracle::write_lifetime(dir_ / "ste" / task / "r" / "lifetime_0", learn);
  }
  const auto r = harness_cli("metrics --log-dir " + path("run") + " --ste-dir " + path("ste") +
                             " --out " + path("out"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const json report = json::parse(oracle::slurp(dir_ / "out" / "report.json"));
  EXPECT_EQ(report["lifetimes"][0]["metrics"]["rp"]["value"].get<double>(), 1.0);
  EXPECT_EQ(report["lifetimes"][0]["metrics"]["se"]["value"].get<double>(), 1.0);
}

TEST_F(CliTest, MetricsOnMissingLogsFails) {
  const auto r = harness_cli("metrics --log-dir " + path("nothing") + " --out " + path("out"));
  EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliTest, ExportThenValidate) {
  const auto e = harness_cli("export-curriculum --name dispersed --seed 4 --out " + path("c.json"));
  ASSERT_EQ(e.exit_code, 0) << e.output;
  const auto v = harness_cli("validate " + path("c.json"));
  EXPECT_EQ(v.exit_code, 0) << v.output;
  EXPECT_NE(v.output.find(": ok"), std::string::npos);

  const auto loaded = harness::load_curriculum_file(dir_ / "c.json");
  EXPECT_EQ(loaded, harness::generate_dispersed(300, 20, 4));
}

TEST_F(CliTest, ValidateReportsTamperedParameter) {
  ASSERT_EQ(harness_cli("export-curriculum --name condensed --out " + path("c.json")).exit_code, 0);
  json doc = json::parse(oracle::slurp(dir_ / "c.json"));
  std::string tampered_path;
  for (std::size_t b = 0; b < doc["blocks"].size() && tampered_path.empty(); ++b) {
    auto& tbs = doc["blocks"][b]["task_blocks"];
    for (std::size_t t = 0; t < tbs.size() && tampered_path.empty(); ++t) {
      if (tbs[t]["task"] != "DoorKey") continue;
      tbs[t]["variants"][0]["params"]["size"] = 2;
      tampered_path = "blocks[" + std::to_string(b) + "].task_blocks[" + std::to_string(t) +
                      "].variants[0].params";
    }
  }
  ASSERT_FALSE(tampered_path.empty());
  std::ofstream(dir_ / "bad.json") << doc.dump(2);
  const auto v = harness_cli("validate " + path("bad.json"));
  EXPECT_EQ(v.exit_code, 1);
  EXPECT_NE(v.output.find(tampered_path + ": [param-bounds]"), std::string::npos) << v.output;
}

TEST_F(CliTest, ValidateRejectsUnparseableFile) {
  std::ofstream(dir_ / "broken.json") << "{\"name\": ";
  const auto v = harness_cli("validate " + path("broken.json"));
  EXPECT_EQ(v.exit_code, 2);
  EXPECT_NE(v.output.find("broken.json"), std::string::npos) << v.output;
}

TEST_F(CliTest, RunFromCurriculumFile) {
  ASSERT_EQ(harness_cli("export-curriculum --name condensed --seed 1 --train-episodes 1 "
                        "--eval-episodes 1 --out " + path("c.json"))
                .exit_code,
            0);
  const auto r = harness_cli("run --curriculum " + path("c.json") +
                             " --agent tabular-q --lifetimes 1 --log-dir " + path("logs") +
                             " --run-name fromfile");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(oracle::block_files(dir_ / "logs" / "fromfile" / "lifetime_0").size(), 37U);
}

TEST_F(CliTest, CurveDataRows) {
  const auto r = harness_cli(std::string(kSmallRun) + " --log-dir " + path("logs") +
                             " --run-name curves");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto c = harness_cli("curve-data --log-dir " + path("logs/curves") + " --out " +
                             path("curves.csv"));
  ASSERT_EQ(c.exit_code, 0) << c.output;
  const std::string csv = oracle::slurp(dir_ / "curves.csv");
  // Header plus 2 lifetimes x 19 eval blocks x 6 tasks.
  EXPECT_EQ(count_lines(csv), 1U + 2U * 19U * 6U);
}

TEST_F(CliTest, SteWritesStoreLayout) {
  const auto r = harness_cli("ste --task DoorKey --agent random --episodes 3 --seed 2 --ste-dir " +
                             path("ste"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::vector<fs::path> runs;
  for (const auto& entry : fs::directory_iterator(dir_ / "ste" / "DoorKey")) runs.push_back(entry.path());
  ASSERT_EQ(runs.size(), 1U);
  const auto dirs = harness::lifetime_dirs(runs[0]);
  ASSERT_EQ(dirs.size(), 1U);
  const auto log = harness::read_lifetime(dirs[0]);
  EXPECT_EQ(log.episodes.size(), 9U);
  const auto store = harness::STEStore::load(dir_ / "ste");
  EXPECT_EQ(store.curves.at("DoorKey").size(), 9U);
}

TEST_F(CliTest, ShowLayout) {
  const auto r = harness_cli("show-layout --task DoorKey --variant small --seed 3");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find('G'), std::string::npos);
  EXPECT_NE(r.output.find('#'), std::string::npos);
  const auto bad = harness_cli("show-layout --task DoorKey --variant enormous");
  EXPECT_EQ(bad.exit_code, 2);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(harness_cli("run --curriculum condensed --agent ppo --log-dir " + path("l")).exit_code, 2);
  EXPECT_EQ(harness_cli("run --curriculum nonsense --agent random --log-dir " + path("l")).exit_code,
            2);
  EXPECT_EQ(harness_cli("run --agent random").exit_code, 2);
  EXPECT_EQ(harness_cli("bogus").exit_code, 2);
  EXPECT_EQ(harness_cli("ste --task Nope --ste-dir " + path("s")).exit_code, 2);
}

TEST_F(CliTest, FailedLifetimeExitsOne) {
  const auto r = harness_cli(
      "run --curriculum condensed --lifetimes 2 --train-episodes 2 --eval-episodes 1 --agent " +
      oracle::quote(std::string("exec:") + PROTOCOL_TEST_AGENT + " --fault bad-action") +
      " --log-dir " + path("l"));
  EXPECT_EQ(r.exit_code, 1) << r.output;
  EXPECT_NE(r.output.find("lifetime_0: failed"), std::string::npos) << r.output;
}
