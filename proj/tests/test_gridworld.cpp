#include <gtest/gtest.h>

#include <cmath>

#include "harness/gridworld.hpp"

using namespace harness;

namespace {

Layout walled(int w, int h) {
  Layout l(w, h);
  l.wall_rect(0, 0, w, h);
  return l;
}

GridWorld custom(const Layout& layout, GoalKind goal = GoalKind::ReachGoal, bool dynamic = false) {
  GridWorldConfig cfg;
  cfg.width = layout.width;
  cfg.height = layout.height;
  cfg.goal = goal;
  cfg.dynamic_obstacles = dynamic;
  cfg.fixed_layout = true;
  cfg.generator = [layout](Pcg32&) { return layout; };
  GridWorld env(cfg, 1);
  env.reset();
  return env;
}

int count_tiles(const Layout& l, ObjectType t) {
  int n = 0;
  for (const auto& tile : l.tiles) n += tile.type == t ? 1 : 0;
  return n;
}

}  // namespace

TEST(GridWorld, ForwardIntoWallDoesNotMove) {
  Layout l = walled(5, 5);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::North;
  GridWorld env = custom(l);
  const StepResult r = env.step(action::kForward);
  EXPECT_EQ(env.agent_pos(), (Position{1, 1}));
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
}

TEST(GridWorld, SuccessRewardAtStepTen) {
  Layout l = walled(5, 5);  // max_steps = 4 * 5 * 5 = 100
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({3, 1}) = Tile::goal();
  GridWorld env = custom(l);
  ASSERT_EQ(env.max_steps(), 100);
  for (int i = 0; i < 8; ++i) EXPECT_FALSE(env.step(action::kDone).done);
  EXPECT_FALSE(env.step(action::kForward).done);
  const StepResult r = env.step(action::kForward);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(env.step_count(), 10);
  EXPECT_EQ(r.reward, 1.0 - 0.9 * (10.0 / 100.0));
  EXPECT_NEAR(r.reward, 0.91, 1e-15);
}

TEST(GridWorld, SevenActionsAcceptedOthersRejected) {
  Layout l = walled(5, 5);
  l.agent_pos = {2, 2};
  GridWorld env = custom(l);
  for (int a = 0; a < 7; ++a) EXPECT_NO_THROW(env.step(a)) << a;
  EXPECT_THROW(env.step(7), std::invalid_argument);
  EXPECT_THROW(env.step(-1), std::invalid_argument);
}

TEST(GridWorld, StepAfterDoneThrows) {
  Layout l = walled(4, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::goal();
  GridWorld env = custom(l);
  ASSERT_TRUE(env.step(action::kForward).done);
  try {
    env.step(action::kTurnLeft);
    FAIL();
  } catch (const EpisodeFinished& e) {
    EXPECT_STREQ(e.what(), "episode finished");
  }
  env.reset();
  EXPECT_EQ(env.step_count(), 0);
  EXPECT_NO_THROW(env.step(action::kTurnLeft));
}

TEST(GridWorld, LavaEndsEpisodeWithZeroReward) {
  Layout l = walled(5, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::lava();
  GridWorld env = custom(l);
  const StepResult r = env.step(action::kForward);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(GridWorld, TimeoutAtMaxSteps) {
  Layout l = walled(3, 3);
  l.agent_pos = {1, 1};
  GridWorld env = custom(l);
  StepResult r;
  int steps = 0;
  do {
    r = env.step(action::kTurnLeft);
    ++steps;
  } while (!r.done);
  EXPECT_EQ(steps, 4 * 3 * 3);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(GridWorld, ObservationIsEgocentric) {
  // 3x3 room: agent in the only free cell, facing East.
  Layout l = walled(3, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  GridWorld env = custom(l);
  const Observation obs = env.observe();
  // Ahead of the agent (view cell (3,5)) is the eastern wall.
  EXPECT_EQ(obs.at(3, 5, 0), static_cast<int>(ObjectType::Wall));
  EXPECT_EQ(obs.at(3, 5, 1), static_cast<int>(Color::Grey));
  // The agent's own cell is empty.
  EXPECT_EQ(obs.at(3, 6, 0), static_cast<int>(ObjectType::Empty));
  // Out-of-bounds cells read as walls.
  EXPECT_EQ(obs.at(0, 0, 0), static_cast<int>(ObjectType::Wall));
}

TEST(GridWorld, ObservationRotatesWithFacing) {
  Layout l = walled(7, 7);
  l.agent_pos = {3, 3};
  l.agent_dir = Direction::North;
  l.at({3, 1}) = Tile::goal();  // two cells north
  l.at({5, 3}) = Tile::lava();  // two cells east
  GridWorld env = custom(l);
  Observation obs = env.observe();
  EXPECT_EQ(obs.at(3, 4, 0), static_cast<int>(ObjectType::Goal));
  EXPECT_EQ(obs.at(5, 6, 0), static_cast<int>(ObjectType::Lava));
  env.step(action::kTurnRight);  // now facing East
  obs = env.observe();
  EXPECT_EQ(obs.at(3, 4, 0), static_cast<int>(ObjectType::Lava));
  EXPECT_EQ(obs.at(1, 6, 0), static_cast<int>(ObjectType::Goal));
}

TEST(GridWorld, ObservationIsPureFunctionOfState) {
  Layout l = walled(6, 6);
  l.agent_pos = {2, 2};
  GridWorld a = custom(l);
  GridWorld b = custom(l);
  EXPECT_EQ(a.observe(), b.observe());
  EXPECT_EQ(a.observe(), a.observe());
}

TEST(GridWorld, PickUpAndDropConserveObjects) {
  Layout l = walled(5, 5);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::object(ObjectType::Box, Color::Purple);
  GridWorld env = custom(l);
  const int before = count_tiles(env.layout(), ObjectType::Box);
  env.step(action::kPickUp);
  ASSERT_TRUE(env.carried().has_value());
  EXPECT_EQ(env.carried()->type, ObjectType::Box);
  EXPECT_EQ(count_tiles(env.layout(), ObjectType::Box), before - 1);
  EXPECT_EQ(env.observe().carried_type, static_cast<int>(ObjectType::Box));
  EXPECT_EQ(env.observe().carried_color, static_cast<int>(Color::Purple));
  env.step(action::kTurnRight);
  env.step(action::kDrop);
  EXPECT_FALSE(env.carried().has_value());
  EXPECT_EQ(count_tiles(env.layout(), ObjectType::Box), before);
  EXPECT_EQ(env.tile({1, 2}).type, ObjectType::Box);
}

TEST(GridWorld, ForwardIntoObjectBlocked) {
  Layout l = walled(5, 5);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::object(ObjectType::Ball, Color::Red);
  GridWorld env = custom(l);
  env.step(action::kForward);
  EXPECT_EQ(env.agent_pos(), (Position{1, 1}));
}

TEST(GridWorld, LockedDoorNeedsMatchingKey) {
  Layout l = walled(6, 3);
  l.agent_pos = {2, 1};
  l.agent_dir = Direction::West;
  l.at({1, 1}) = Tile::object(ObjectType::Key, Color::Red);
  l.at({3, 1}) = Tile::door(Color::Blue, DoorState::Locked);
  GridWorld env = custom(l, GoalKind::OpenLockedDoor);
  env.step(action::kPickUp);
  env.step(action::kTurnLeft);
  env.step(action::kTurnLeft);
  StepResult r = env.step(action::kToggle);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(env.tile({3, 1}).state, DoorState::Locked);
  env.step(action::kForward);
  EXPECT_EQ(env.agent_pos(), (Position{2, 1}));

  Layout m = l;
  m.at({1, 1}) = Tile::object(ObjectType::Key, Color::Blue);
  GridWorld env2 = custom(m, GoalKind::OpenLockedDoor);
  env2.step(action::kPickUp);
  env2.step(action::kTurnLeft);
  env2.step(action::kTurnLeft);
  r = env2.step(action::kToggle);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(env2.tile({3, 1}).state, DoorState::Open);
  EXPECT_GT(r.reward, 0.1);
}

TEST(GridWorld, ClosedDoorTogglesAndBecomesWalkable) {
  Layout l = walled(5, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::door(Color::Green, DoorState::Closed);
  GridWorld env = custom(l);
  env.step(action::kForward);
  EXPECT_EQ(env.agent_pos(), (Position{1, 1}));
  env.step(action::kToggle);
  EXPECT_EQ(env.tile({2, 1}).state, DoorState::Open);
  env.step(action::kForward);
  EXPECT_EQ(env.agent_pos(), (Position{2, 1}));
}

TEST(GridWorld, ForwardIntoMovingObstacleCollides) {
  Layout l = walled(5, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::object(ObjectType::Ball, Color::Blue);
  l.obstacles = {{2, 1}};
  GridWorld env = custom(l, GoalKind::ReachGoal, true);
  const StepResult r = env.step(action::kForward);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, -1.0);
}

TEST(GridWorld, ObstacleMovingOntoAgentCollides) {
  // Corridor: obstacle can only stay or move west onto the agent.
  Layout l = walled(4, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::North;
  l.at({2, 1}) = Tile::object(ObjectType::Ball, Color::Blue);
  l.obstacles = {{2, 1}};
  GridWorld env = custom(l, GoalKind::ReachGoal, true);
  bool collided = false;
  for (int i = 0; i < 40 && !collided; ++i) {
    const StepResult r = env.step(action::kTurnLeft);
    if (r.done) {
      EXPECT_EQ(r.reward, -1.0);
      collided = true;
    }
  }
  EXPECT_TRUE(collided);
}

TEST(GridWorld, RenderLegend) {
  Layout l = walled(5, 3);
  l.agent_pos = {1, 1};
  l.agent_dir = Direction::East;
  l.at({2, 1}) = Tile::lava();
  l.at({3, 1}) = Tile::goal();
  GridWorld env = custom(l);
  EXPECT_EQ(env.render(), "#####\n#>~G#\n#####\n");
}

TEST(Tile, WalkableAndPickable) {
  EXPECT_TRUE(Tile::empty().walkable());
  EXPECT_TRUE(Tile::goal().walkable());
  EXPECT_TRUE(Tile::lava().walkable());
  EXPECT_FALSE(Tile::wall().walkable());
  EXPECT_FALSE(Tile::door(Color::Red, DoorState::Locked).walkable());
  EXPECT_TRUE(Tile::door(Color::Red, DoorState::Open).walkable());
  EXPECT_TRUE(Tile::object(ObjectType::Key, Color::Red).pickable());
  EXPECT_FALSE(Tile::goal().pickable());
}
