#include <gtest/gtest.h>

#include "harness/agents.hpp"
#include "harness/tasks.hpp"
#include "oracles.hpp"

using namespace harness;

namespace {

TaskVariantSpec spec_for(const std::string& task, const std::string& variant,
                         bool fixed_layout = false) {
  const TaskDefinition* def = TaskRegistry::instance().find(task);
  return TaskVariantSpec{task, variant, *def->find_variant(variant), ExperienceLimit::episodes(1),
                         fixed_layout};
}

int count_type(const Layout& l, ObjectType t) {
  int n = 0;
  for (const auto& tile : l.tiles) n += tile.type == t ? 1 : 0;
  return n;
}

}  // namespace

TEST(Tasks, EveryVariantSolvable) {
  for (const auto& def : TaskRegistry::instance().tasks()) {
    if (def.name.rfind("Test", 0) == 0) continue;
    for (const auto& [variant, params] : def.variants) {
      for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const std::string problem = oracle::verify_solvable(spec_for(def.name, variant), seed);
        EXPECT_TRUE(problem.empty()) << problem;
      }
    }
  }
}

TEST(Tasks, SameSeedSameLayout) {
  for (const auto& def : TaskRegistry::instance().tasks()) {
    const auto spec = spec_for(def.name, "large");
    GridWorld a = make_env(spec, 42);
    GridWorld b = make_env(spec, 42);
    EXPECT_EQ(a.layout(), b.layout()) << def.name;
    a.reset();
    b.reset();
    EXPECT_EQ(a.observe(), b.observe());
  }
}

TEST(Tasks, FixedLayoutResetsToConstructionLayout) {
  GridWorld env = make_env(spec_for("SimpleCrossing", "medium", true), 3);
  const Layout initial = env.layout();
  const Observation first = env.reset();
  env.step(action::kForward);
  env.step(action::kTurnLeft);
  EXPECT_EQ(env.reset(), first);
  EXPECT_EQ(env.layout(), initial);
  EXPECT_EQ(env.step_count(), 0);
}

TEST(Tasks, ProceduralResetDrawsNewLayouts) {
  GridWorld env = make_env(spec_for("SimpleCrossing", "large"), 3);
  env.reset();
  const Layout first = env.layout();
  bool differs = false;
  for (int i = 0; i < 10 && !differs; ++i) {
    env.reset();
    differs = !(env.layout() == first);
  }
  EXPECT_TRUE(differs);
}

TEST(Tasks, DynamicObstaclesSmallHasTwoBalls) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GridWorld env = make_env(spec_for("DynamicObstacles", "small"), seed);
    env.reset();
    EXPECT_EQ(count_type(env.layout(), ObjectType::Ball), 2);
    EXPECT_EQ(env.obstacles().size(), 2U);
    EXPECT_EQ(count_type(env.layout(), ObjectType::Goal), 1);
  }
}

TEST(Tasks, DistributionalShiftLavaRow) {
  for (const char* variant : {"small", "medium", "large"}) {
    const auto spec = spec_for("DistributionalShift", variant);
    const int row = static_cast<int>(spec.params.at("lava_row"));
    GridWorld env = make_env(spec, 11);
    for (int episode = 0; episode < 5; ++episode) {
      env.reset();
      const Layout& l = env.layout();
      int lava = 0;
      for (int y = 0; y < l.height; ++y) {
        for (int x = 0; x < l.width; ++x) {
          if (l.at({x, y}).type == ObjectType::Lava) {
            EXPECT_EQ(y, row);
            ++lava;
          }
        }
      }
      EXPECT_GT(lava, 0);
    }
  }
}

TEST(Tasks, CustomFetchHasYellowKeyTargets) {
  const auto spec = spec_for("CustomFetch", "medium");
  GridWorld env = make_env(spec, 5);
  env.reset();
  int yellow_keys = 0;
  int objects = 0;
  for (const auto& t : env.layout().tiles) {
    if (t.type == ObjectType::Key && t.color == Color::Yellow) ++yellow_keys;
    if (t.pickable()) ++objects;
  }
  EXPECT_EQ(yellow_keys, 2);
  EXPECT_EQ(objects, 6);
}

TEST(Tasks, ParameterOutOfBoundsNamesParameter) {
  auto spec = spec_for("DoorKey", "small");
  spec.params["size"] = 2;
  try {
    make_env(spec, 0);
    FAIL();
  } catch (const EnvConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("size"), std::string::npos) << e.what();
  }
  auto fetch = spec_for("CustomFetch", "small");
  fetch.params["n_targets"] = 9;
  try {
    make_env(fetch, 0);
    FAIL();
  } catch (const EnvConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("n_targets"), std::string::npos) << e.what();
  }
  auto missing = spec_for("Unlock", "small");
  missing.params.clear();
  EXPECT_THROW(make_env(missing, 0), EnvConstructionError);
  auto unknown = spec_for("Unlock", "small");
  unknown.task_name = "Nope";
  EXPECT_THROW(make_env(unknown, 0), EnvConstructionError);
}

TEST(Tasks, EpisodesNeverExceedMaxStepsAndRewardsInRange) {
  for (const auto& def : TaskRegistry::instance().tasks()) {
    if (def.name.rfind("Test", 0) == 0) continue;
    for (const auto& [variant, params] : def.variants) {
      GridWorld env = make_env(spec_for(def.name, variant), 17);
      EXPECT_EQ(env.max_steps(), 4 * env.width() * env.height());
      Pcg32 rng(9);
      for (int episode = 0; episode < 5; ++episode) {
        env.reset();
        StepResult r;
        int steps = 0;
        do {
          r = env.step(static_cast<int>(rng.below(action::kCount)));
          ++steps;
          if (!r.done) EXPECT_EQ(r.reward, 0.0);
        } while (!r.done);
        EXPECT_LE(steps, env.max_steps());
        const bool valid = r.reward == 0.0 || r.reward == -1.0 ||
                           (r.reward >= 0.1 - 1e-12 && r.reward <= 1.0);
        EXPECT_TRUE(valid) << r.reward;
      }
    }
  }
}
