#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "harness/prng.hpp"

namespace harness {

enum class ObjectType : std::uint8_t {
  Empty = 0,
  Wall = 1,
  Floor = 2,
  Door = 3,
  Key = 4,
  Ball = 5,
  Box = 6,
  Goal = 7,
  Lava = 8,
};

enum class Color : std::uint8_t {
  None = 0,
  Red = 1,
  Green = 2,
  Blue = 3,
  Purple = 4,
  Yellow = 5,
  Grey = 6,
};

enum class DoorState : std::uint8_t { None = 0, Open = 1, Closed = 2, Locked = 3 };

struct Tile {
  ObjectType type = ObjectType::Empty;
  Color color = Color::None;
  DoorState state = DoorState::None;

  static constexpr Tile empty() { return {}; }
  static constexpr Tile wall() { return {ObjectType::Wall, Color::Grey, DoorState::None}; }
  static constexpr Tile goal() { return {ObjectType::Goal, Color::Green, DoorState::None}; }
  static constexpr Tile lava() { return {ObjectType::Lava, Color::Red, DoorState::None}; }
  static constexpr Tile door(Color c, DoorState s) { return {ObjectType::Door, c, s}; }
  static constexpr Tile object(ObjectType t, Color c) { return {t, c, DoorState::None}; }

  /// Whether the agent may stand on this tile.
  bool walkable() const;
  /// Key, Ball and Box can be carried.
  bool pickable() const;

  bool operator==(const Tile&) const = default;
};

enum class Direction : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

struct Position {
  int x = 0;
  int y = 0;

  bool operator==(const Position&) const = default;
};

Position offset(Direction d);
Direction turn_left(Direction d);
Direction turn_right(Direction d);

namespace action {
inline constexpr int kTurnLeft = 0;
inline constexpr int kTurnRight = 1;
inline constexpr int kForward = 2;
inline constexpr int kPickUp = 3;
inline constexpr int kDrop = 4;
inline constexpr int kToggle = 5;
inline constexpr int kDone = 6;
inline constexpr int kCount = 7;
}  // namespace action

/// Egocentric 7x7x3 view. Cell (3, 6) is the agent, facing towards y = 0.
/// Storage is (x, y, channel) major, matching the wire form view[x][y][c].
struct Observation {
  static constexpr int kViewSize = 7;
  static constexpr int kChannels = 3;
  static constexpr std::size_t kBytes = kViewSize * kViewSize * kChannels;

  std::array<std::uint8_t, kBytes> view{};
  std::uint8_t carried_type = 0;
  std::uint8_t carried_color = 0;

  std::uint8_t at(int x, int y, int channel) const {
    return view[static_cast<std::size_t>((x * kViewSize + y) * kChannels + channel)];
  }
  std::uint8_t& at(int x, int y, int channel) {
    return view[static_cast<std::size_t>((x * kViewSize + y) * kChannels + channel)];
  }

  bool operator==(const Observation&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

/// What counts as success for a task.
enum class GoalKind { ReachGoal, PickUpYellowKey, OpenLockedDoor };

/// Generated grid contents before an episode starts.
struct Layout {
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;
  Position agent_pos;
  Direction agent_dir = Direction::East;
  std::vector<Position> obstacles;

  Layout() = default;
  Layout(int w, int h);

  bool in_bounds(Position p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  const Tile& at(Position p) const { return tiles[index(p)]; }
  Tile& at(Position p) { return tiles[index(p)]; }
  std::size_t index(Position p) const {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(p.x);
  }

  void wall_rect(int x0, int y0, int w, int h);
  /// Places `tile` on a uniformly drawn empty cell of the given region that
  /// is not the agent's cell. Throws if the region has no such cell.
  Position place_random(const Tile& tile, int x0, int y0, int w, int h, Pcg32& rng);
  /// Draws an empty cell in the region for the agent and a random facing.
  void place_agent_random(int x0, int y0, int w, int h, Pcg32& rng);

  bool operator==(const Layout&) const = default;
};

using LayoutGenerator = std::function<Layout(Pcg32&)>;

struct GridWorldConfig {
  int width = 0;
  int height = 0;
  GoalKind goal = GoalKind::ReachGoal;
  bool dynamic_obstacles = false;
  bool fixed_layout = false;
  LayoutGenerator generator;
};

class EpisodeFinished : public std::logic_error {
 public:
  EpisodeFinished() : std::logic_error("episode finished") {}
};

/// Tile-grid environment with seven-action dynamics and sparse reward.
///
/// Construction draws one layout from the seeded stream. With `fixed_layout`
/// every reset restores that layout; otherwise each reset draws a new one.
class GridWorld {
 public:
  static constexpr double kStepPenalty = 0.9;

  GridWorld(GridWorldConfig config, std::uint64_t seed);

  Observation reset();
  /// Throws EpisodeFinished when called after a terminal step and
  /// std::invalid_argument for actions outside [0, 6].
  StepResult step(int action);
  Observation observe() const;

  int width() const { return config_.width; }
  int height() const { return config_.height; }
  int max_steps() const { return max_steps_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  bool fixed_layout() const { return config_.fixed_layout; }
  GoalKind goal() const { return config_.goal; }

  const Layout& layout() const { return current_; }
  const Tile& tile(Position p) const { return current_.at(p); }
  Position agent_pos() const { return current_.agent_pos; }
  Direction agent_dir() const { return current_.agent_dir; }
  const std::vector<Position>& obstacles() const { return current_.obstacles; }
  const std::optional<Tile>& carried() const { return carried_; }

  /// One character per tile; see README for the legend.
  std::string render() const;

 private:
  Layout generate();
  double success_reward() const;
  bool is_obstacle(Position p) const;
  bool move_obstacles();

  GridWorldConfig config_;
  Pcg32 rng_;
  Layout initial_;
  Layout current_;
  std::optional<Tile> carried_;
  int step_count_ = 0;
  int max_steps_ = 0;
  bool done_ = false;
  bool pristine_ = true;
};

}  // namespace harness
