#include "harness/gridworld.hpp"

#include <algorithm>
#include <utility>

namespace harness {

bool Tile::walkable() const {
  switch (type) {
    case ObjectType::Empty:
    case ObjectType::Floor:
    case ObjectType::Goal:
    case ObjectType::Lava:
      return true;
    case ObjectType::Door:
      return state == DoorState::Open;
    default:
      return false;
  }
}

bool Tile::pickable() const {
  return type == ObjectType::Key || type == ObjectType::Ball || type == ObjectType::Box;
}

Position offset(Direction d) {
  switch (d) {
    case Direction::North:
      return {0, -1};
    case Direction::East:
      return {1, 0};
    case Direction::South:
      return {0, 1};
    case Direction::West:
      return {-1, 0};
  }
  return {0, 0};
}

Direction turn_left(Direction d) {
  return static_cast<Direction>((static_cast<int>(d) + 3) % 4);
}

Direction turn_right(Direction d) {
  return static_cast<Direction>((static_cast<int>(d) + 1) % 4);
}

namespace {

Position add(Position p, Position d, int scale = 1) {
  return {p.x + d.x * scale, p.y + d.y * scale};
}

}  // namespace

Layout::Layout(int w, int h)
    : width(w), height(h), tiles(static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {}

void Layout::wall_rect(int x0, int y0, int w, int h) {
  for (int x = x0; x < x0 + w; ++x) {
    at({x, y0}) = Tile::wall();
    at({x, y0 + h - 1}) = Tile::wall();
  }
  for (int y = y0; y < y0 + h; ++y) {
    at({x0, y}) = Tile::wall();
    at({x0 + w - 1, y}) = Tile::wall();
  }
}

Position Layout::place_random(const Tile& tile, int x0, int y0, int w, int h, Pcg32& rng) {
  bool any_free = false;
  for (int y = y0; y < y0 + h && !any_free; ++y) {
    for (int x = x0; x < x0 + w && !any_free; ++x) {
      const Position p{x, y};
      any_free = at(p).type == ObjectType::Empty && !(p == agent_pos);
    }
  }
  if (!any_free) throw std::runtime_error("layout: no free cell in placement region");
  for (;;) {
    const Position p{x0 + static_cast<int>(rng.below(static_cast<std::uint32_t>(w))),
                     y0 + static_cast<int>(rng.below(static_cast<std::uint32_t>(h)))};
    if (at(p).type != ObjectType::Empty || p == agent_pos) continue;
    at(p) = tile;
    return p;
  }
}

void Layout::place_agent_random(int x0, int y0, int w, int h, Pcg32& rng) {
  // Park the agent off-grid so place_random does not exclude its old cell.
  agent_pos = {-1, -1};
  const Position p = place_random(Tile::empty(), x0, y0, w, h, rng);
  agent_pos = p;
  agent_dir = static_cast<Direction>(rng.below(4));
}

GridWorld::GridWorld(GridWorldConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      rng_(seed),
      max_steps_(4 * config_.width * config_.height) {
  initial_ = generate();
  current_ = initial_;
}

Layout GridWorld::generate() {
  Layout layout = config_.generator(rng_);
  if (layout.width != config_.width || layout.height != config_.height) {
    throw std::logic_error("layout generator produced the wrong grid size");
  }
  return layout;
}

Observation GridWorld::reset() {
  // The layout drawn at construction serves the first episode.
  if (config_.fixed_layout) {
    current_ = initial_;
  } else if (!pristine_) {
    current_ = generate();
  }
  pristine_ = false;
  carried_.reset();
  step_count_ = 0;
  done_ = false;
  return observe();
}

double GridWorld::success_reward() const {
  return 1.0 - kStepPenalty * (static_cast<double>(step_count_) / static_cast<double>(max_steps_));
}

bool GridWorld::is_obstacle(Position p) const {
  return config_.dynamic_obstacles &&
         std::find(current_.obstacles.begin(), current_.obstacles.end(), p) !=
             current_.obstacles.end();
}

bool GridWorld::move_obstacles() {
  bool hit_agent = false;
  for (auto& obstacle : current_.obstacles) {
    const Position target = add(obstacle, offset(static_cast<Direction>(rng_.below(4))));
    if (!current_.in_bounds(target) || current_.at(target).type != ObjectType::Empty) continue;
    current_.at(target) = current_.at(obstacle);
    current_.at(obstacle) = Tile::empty();
    obstacle = target;
    hit_agent = hit_agent || target == current_.agent_pos;
  }
  return hit_agent;
}

StepResult GridWorld::step(int act) {
  if (done_) throw EpisodeFinished();
  if (act < 0 || act >= action::kCount) {
    throw std::invalid_argument("action out of range [0, 6]: " + std::to_string(act));
  }
  ++step_count_;

  StepResult result;
  const Position front = add(current_.agent_pos, offset(current_.agent_dir));
  const bool front_ok = current_.in_bounds(front);

  switch (act) {
    case action::kTurnLeft:
      current_.agent_dir = turn_left(current_.agent_dir);
      break;
    case action::kTurnRight:
      current_.agent_dir = turn_right(current_.agent_dir);
      break;
    case action::kForward:
      if (!front_ok) break;
      if (is_obstacle(front)) {
        result.reward = -1.0;
        result.done = true;
      } else if (current_.at(front).walkable()) {
        current_.agent_pos = front;
        const ObjectType under = current_.at(front).type;
        if (under == ObjectType::Goal && config_.goal == GoalKind::ReachGoal) {
          result.reward = success_reward();
          result.done = true;
        } else if (under == ObjectType::Lava) {
          result.done = true;
        }
      }
      break;
    case action::kPickUp:
      if (front_ok && !carried_ && current_.at(front).pickable() && !is_obstacle(front)) {
        carried_ = current_.at(front);
        current_.at(front) = Tile::empty();
        if (config_.goal == GoalKind::PickUpYellowKey && carried_->type == ObjectType::Key &&
            carried_->color == Color::Yellow) {
          result.reward = success_reward();
          result.done = true;
        }
      }
      break;
    case action::kDrop:
      if (front_ok && carried_ && current_.at(front).type == ObjectType::Empty) {
        current_.at(front) = *carried_;
        carried_.reset();
      }
      break;
    case action::kToggle:
      if (front_ok && current_.at(front).type == ObjectType::Door) {
        Tile& door = current_.at(front);
        if (door.state == DoorState::Locked) {
          if (carried_ && carried_->type == ObjectType::Key && carried_->color == door.color) {
            door.state = DoorState::Open;
            if (config_.goal == GoalKind::OpenLockedDoor) {
              result.reward = success_reward();
              result.done = true;
            }
          }
        } else {
          door.state = door.state == DoorState::Open ? DoorState::Closed : DoorState::Open;
        }
      }
      break;
    default:
      break;
  }

  if (!result.done && config_.dynamic_obstacles && move_obstacles()) {
    result.reward = -1.0;
    result.done = true;
  }
  if (!result.done && step_count_ >= max_steps_) result.done = true;

  done_ = result.done;
  result.observation = observe();
  return result;
}

Observation GridWorld::observe() const {
  Observation obs;
  const Position forward = offset(current_.agent_dir);
  const Position right = offset(turn_right(current_.agent_dir));
  for (int vx = 0; vx < Observation::kViewSize; ++vx) {
    for (int vy = 0; vy < Observation::kViewSize; ++vy) {
      const Position p = add(add(current_.agent_pos, forward, Observation::kViewSize - 1 - vy),
                             right, vx - Observation::kViewSize / 2);
      const Tile t = current_.in_bounds(p) ? current_.at(p) : Tile::wall();
      obs.at(vx, vy, 0) = static_cast<std::uint8_t>(t.type);
      obs.at(vx, vy, 1) = static_cast<std::uint8_t>(t.color);
      obs.at(vx, vy, 2) = static_cast<std::uint8_t>(t.state);
    }
  }
  if (carried_) {
    obs.carried_type = static_cast<std::uint8_t>(carried_->type);
    obs.carried_color = static_cast<std::uint8_t>(carried_->color);
  }
  return obs;
}

std::string GridWorld::render() const {
  static constexpr char kAgent[] = {'^', '>', 'v', '<'};
  std::string out;
  out.reserve(static_cast<std::size_t>((width() + 1) * height()));
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const Position p{x, y};
      if (p == current_.agent_pos) {
        out += kAgent[static_cast<int>(current_.agent_dir)];
        continue;
      }
      const Tile& t = current_.at(p);
      switch (t.type) {
        case ObjectType::Empty: out += '.'; break;
        case ObjectType::Wall: out += '#'; break;
        case ObjectType::Floor: out += '_'; break;
        case ObjectType::Door:
          out += t.state == DoorState::Locked ? 'L' : t.state == DoorState::Closed ? 'D' : '/';
          break;
        case ObjectType::Key: out += t.color == Color::Yellow ? 'Y' : 'K'; break;
        case ObjectType::Ball: out += 'O'; break;
        case ObjectType::Box: out += 'X'; break;
        case ObjectType::Goal: out += 'G'; break;
        case ObjectType::Lava: out += '~'; break;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace harness
