#include "harness/tasks.hpp"

#include <algorithm>
#include <deque>
#include <span>

namespace harness {

namespace {

int param(const TaskParams& params, const std::string& name) {
  return static_cast<int>(params.at(name));
}

// SimpleCrossing: walls crossing the room, each with one opening, arranged so
// that a monotone right/down path joins the top-left start to the
// bottom-right goal.
Layout crossing_layout(int size, int crossings, Pcg32& rng) {
  Layout g(size, size);
  g.wall_rect(0, 0, size, size);
  g.agent_pos = {1, 1};
  g.agent_dir = Direction::East;
  g.at({size - 2, size - 2}) = Tile::goal();

  struct River {
    bool vertical;
    int pos;
  };
  std::vector<River> rivers;
  for (int i = 2; i < size - 2; i += 2) rivers.push_back({true, i});
  for (int i = 2; i < size - 2; i += 2) rivers.push_back({false, i});
  fisher_yates(std::span<River>(rivers), rng);
  rivers.resize(static_cast<std::size_t>(crossings));

  std::vector<int> cols;
  std::vector<int> rows;
  for (const River& r : rivers) (r.vertical ? cols : rows).push_back(r.pos);
  std::sort(cols.begin(), cols.end());
  std::sort(rows.begin(), rows.end());
  for (int x : cols) {
    for (int y = 1; y < size - 1; ++y) g.at({x, y}) = Tile::wall();
  }
  for (int y : rows) {
    for (int x = 1; x < size - 1; ++x) g.at({x, y}) = Tile::wall();
  }

  // 0 = cross a vertical wall (move right), 1 = cross a horizontal wall.
  std::vector<int> path(cols.size(), 0);
  path.insert(path.end(), rows.size(), 1);
  fisher_yates(std::span<int>(path), rng);

  std::vector<int> limits_x{0};
  limits_x.insert(limits_x.end(), cols.begin(), cols.end());
  limits_x.push_back(size - 1);
  std::vector<int> limits_y{0};
  limits_y.insert(limits_y.end(), rows.begin(), rows.end());
  limits_y.push_back(size - 1);

  auto pick = [&rng](int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(rng.below(static_cast<std::uint32_t>(hi - lo + 1)));
  };
  std::size_t rx = 0;
  std::size_t ry = 0;
  for (int step : path) {
    if (step == 0) {
      const int x = limits_x[rx + 1];
      const int y = pick(limits_y[ry] + 1, limits_y[ry + 1] - 1);
      g.at({x, y}) = Tile::empty();
      ++rx;
    } else {
      const int y = limits_y[ry + 1];
      const int x = pick(limits_x[rx] + 1, limits_x[rx + 1] - 1);
      g.at({x, y}) = Tile::empty();
      ++ry;
    }
  }
  return g;
}

// DistributionalShift: a lava strip sits between the start and the goal on
// the configured row.
Layout lava_layout(int size, int lava_row, Pcg32& rng) {
  Layout g(size, size);
  g.wall_rect(0, 0, size, size);
  for (int x = 3; x <= size - 4; ++x) g.at({x, lava_row}) = Tile::lava();
  g.at({size - 2, lava_row}) = Tile::goal();
  g.agent_pos = {1, lava_row};
  g.agent_dir = static_cast<Direction>(rng.below(4));
  return g;
}

Layout obstacle_layout(int size, int n_obstacles, Pcg32& rng) {
  Layout g(size, size);
  g.wall_rect(0, 0, size, size);
  g.agent_pos = {1, 1};
  g.agent_dir = Direction::East;
  g.at({size - 2, size - 2}) = Tile::goal();
  for (int i = 0; i < n_obstacles; ++i) {
    g.obstacles.push_back(
        g.place_random(Tile::object(ObjectType::Ball, Color::Blue), 1, 1, size - 2, size - 2, rng));
  }
  return g;
}

Color random_color(Pcg32& rng) { return static_cast<Color>(1 + rng.below(6)); }

bool is_yellow_key(const Tile& t) { return t.type == ObjectType::Key && t.color == Color::Yellow; }

// True when some yellow key borders a cell the agent can walk to.
bool yellow_key_reachable(const Layout& g) {
  std::vector<char> seen(g.tiles.size(), 0);
  std::deque<Position> queue{g.agent_pos};
  seen[g.index(g.agent_pos)] = 1;
  while (!queue.empty()) {
    const Position p = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      const Position o = offset(static_cast<Direction>(d));
      const Position n{p.x + o.x, p.y + o.y};
      if (!g.in_bounds(n) || seen[g.index(n)]) continue;
      if (is_yellow_key(g.at(n))) return true;
      if (!g.at(n).walkable()) continue;
      seen[g.index(n)] = 1;
      queue.push_back(n);
    }
  }
  return false;
}

// CustomFetch: yellow keys among distractor objects; resampled until a key is
// reachable without moving other objects.
Layout fetch_layout(int size, int n_targets, int n_objects, Pcg32& rng) {
  for (;;) {
    Layout g(size, size);
    g.wall_rect(0, 0, size, size);
    g.agent_pos = {-1, -1};
    for (int i = 0; i < n_targets; ++i) {
      g.place_random(Tile::object(ObjectType::Key, Color::Yellow), 1, 1, size - 2, size - 2, rng);
    }
    static constexpr ObjectType kKinds[] = {ObjectType::Key, ObjectType::Ball, ObjectType::Box};
    for (int i = n_targets; i < n_objects; ++i) {
      Tile t;
      do {
        t = Tile::object(kKinds[rng.below(3)], random_color(rng));
      } while (is_yellow_key(t));
      g.place_random(t, 1, 1, size - 2, size - 2, rng);
    }
    g.place_agent_random(1, 1, size - 2, size - 2, rng);
    if (yellow_key_reachable(g)) return g;
  }
}

// Unlock: two rooms joined by a locked door; the matching key lies in the
// agent's room.
Layout unlock_layout(int room_size, Pcg32& rng) {
  const int width = 2 * room_size - 1;
  Layout g(width, room_size);
  g.wall_rect(0, 0, width, room_size);
  const int wall_x = room_size - 1;
  for (int y = 0; y < room_size; ++y) g.at({wall_x, y}) = Tile::wall();
  const Color color = random_color(rng);
  const int door_y = 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(room_size - 2)));
  g.at({wall_x, door_y}) = Tile::door(color, DoorState::Locked);
  g.agent_pos = {-1, -1};
  g.place_random(Tile::object(ObjectType::Key, color), 1, 1, room_size - 2, room_size - 2, rng);
  g.place_agent_random(1, 1, room_size - 2, room_size - 2, rng);
  return g;
}

// DoorKey: a wall splits the grid; the goal is behind a locked yellow door.
Layout door_key_layout(int size, Pcg32& rng) {
  Layout g(size, size);
  g.wall_rect(0, 0, size, size);
  g.at({size - 2, size - 2}) = Tile::goal();
  const int split = 2 + static_cast<int>(rng.below(static_cast<std::uint32_t>(size - 4)));
  for (int y = 0; y < size; ++y) g.at({split, y}) = Tile::wall();
  g.agent_pos = {-1, -1};
  g.place_agent_random(1, 1, split - 1, size - 2, rng);
  const int door_y = 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(size - 2)));
  g.at({split, door_y}) = Tile::door(Color::Yellow, DoorState::Locked);
  g.place_random(Tile::object(ObjectType::Key, Color::Yellow), 1, 1, split - 1, size - 2, rng);
  return g;
}

TaskDefinition simple_crossing() {
  TaskDefinition def;
  def.name = "SimpleCrossing";
  def.bounds = {{"size", 5, 31}, {"crossings", 1, 28}};
  def.variants = {{"small", {{"size", 9}, {"crossings", 1}}},
                  {"medium", {{"size", 11}, {"crossings", 2}}},
                  {"large", {{"size", 13}, {"crossings", 3}}}};
  def.cross_check = [](const TaskParams& p) -> std::optional<std::string> {
    const int size = param(p, "size");
    const int candidates = 2 * ((size - 3) / 2);
    if (param(p, "crossings") > candidates) {
      return "crossings: at most " + std::to_string(candidates) + " for size " +
             std::to_string(size);
    }
    return std::nullopt;
  };
  def.configure = [](const TaskParams& p) {
    const int size = param(p, "size");
    const int crossings = param(p, "crossings");
    GridWorldConfig cfg;
    cfg.width = cfg.height = size;
    cfg.generator = [size, crossings](Pcg32& rng) { return crossing_layout(size, crossings, rng); };
    return cfg;
  };
  return def;
}

TaskDefinition distributional_shift() {
  TaskDefinition def;
  def.name = "DistributionalShift";
  def.bounds = {{"size", 7, 31}, {"lava_row", 1, 29}};
  def.variants = {{"small", {{"size", 9}, {"lava_row", 1}}},
                  {"medium", {{"size", 9}, {"lava_row", 2}}},
                  {"large", {{"size", 9}, {"lava_row", 3}}}};
  def.cross_check = [](const TaskParams& p) -> std::optional<std::string> {
    if (param(p, "lava_row") > param(p, "size") - 2) return "lava_row: must lie inside the walls";
    return std::nullopt;
  };
  def.configure = [](const TaskParams& p) {
    const int size = param(p, "size");
    const int row = param(p, "lava_row");
    GridWorldConfig cfg;
    cfg.width = cfg.height = size;
    cfg.generator = [size, row](Pcg32& rng) { return lava_layout(size, row, rng); };
    return cfg;
  };
  return def;
}

TaskDefinition dynamic_obstacles() {
  TaskDefinition def;
  def.name = "DynamicObstacles";
  def.bounds = {{"size", 5, 31}, {"n_obstacles", 0, 200}};
  def.variants = {{"small", {{"size", 6}, {"n_obstacles", 2}}},
                  {"medium", {{"size", 8}, {"n_obstacles", 4}}},
                  {"large", {{"size", 10}, {"n_obstacles", 6}}}};
  def.cross_check = [](const TaskParams& p) -> std::optional<std::string> {
    const int interior = param(p, "size") - 2;
    if (param(p, "n_obstacles") > interior * interior / 4) {
      return "n_obstacles: at most a quarter of the interior cells";
    }
    return std::nullopt;
  };
  def.configure = [](const TaskParams& p) {
    const int size = param(p, "size");
    const int n = param(p, "n_obstacles");
    GridWorldConfig cfg;
    cfg.width = cfg.height = size;
    cfg.dynamic_obstacles = true;
    cfg.generator = [size, n](Pcg32& rng) { return obstacle_layout(size, n, rng); };
    return cfg;
  };
  return def;
}

TaskDefinition custom_fetch() {
  TaskDefinition def;
  def.name = "CustomFetch";
  def.bounds = {{"size", 5, 31}, {"n_targets", 1, 20}, {"n_objects", 1, 100}};
  def.variants = {{"small", {{"size", 8}, {"n_targets", 1}, {"n_objects", 4}}},
                  {"medium", {{"size", 10}, {"n_targets", 2}, {"n_objects", 6}}},
                  {"large", {{"size", 12}, {"n_targets", 2}, {"n_objects", 8}}}};
  def.cross_check = [](const TaskParams& p) -> std::optional<std::string> {
    if (param(p, "n_targets") > param(p, "n_objects")) return "n_targets: exceeds n_objects";
    const int interior = param(p, "size") - 2;
    if (param(p, "n_objects") > interior * interior / 2) {
      return "n_objects: at most half of the interior cells";
    }
    return std::nullopt;
  };
  def.configure = [](const TaskParams& p) {
    const int size = param(p, "size");
    const int targets = param(p, "n_targets");
    const int objects = param(p, "n_objects");
    GridWorldConfig cfg;
    cfg.width = cfg.height = size;
    cfg.goal = GoalKind::PickUpYellowKey;
    cfg.generator = [=](Pcg32& rng) { return fetch_layout(size, targets, objects, rng); };
    return cfg;
  };
  return def;
}

TaskDefinition unlock() {
  TaskDefinition def;
  def.name = "Unlock";
  def.bounds = {{"room_size", 4, 16}};
  def.variants = {{"small", {{"room_size", 5}}},
                  {"medium", {{"room_size", 7}}},
                  {"large", {{"room_size", 9}}}};
  def.configure = [](const TaskParams& p) {
    const int room = param(p, "room_size");
    GridWorldConfig cfg;
    cfg.width = 2 * room - 1;
    cfg.height = room;
    cfg.goal = GoalKind::OpenLockedDoor;
    cfg.generator = [room](Pcg32& rng) { return unlock_layout(room, rng); };
    return cfg;
  };
  return def;
}

TaskDefinition door_key() {
  TaskDefinition def;
  def.name = "DoorKey";
  def.bounds = {{"size", 5, 31}};
  def.variants = {{"small", {{"size", 6}}}, {"medium", {{"size", 8}}}, {"large", {{"size", 10}}}};
  def.configure = [](const TaskParams& p) {
    const int size = param(p, "size");
    GridWorldConfig cfg;
    cfg.width = cfg.height = size;
    cfg.generator = [size](Pcg32& rng) { return door_key_layout(size, rng); };
    return cfg;
  };
  return def;
}

}  // namespace

const TaskParams* TaskDefinition::find_variant(const std::string& variant_name) const {
  for (const auto& [name, params] : variants) {
    if (name == variant_name) return &params;
  }
  return nullptr;
}

TaskRegistry& TaskRegistry::instance() {
  static TaskRegistry registry;
  return registry;
}

TaskRegistry::TaskRegistry() {
  tasks_ = {simple_crossing(), distributional_shift(), dynamic_obstacles(),
            custom_fetch(),    unlock(),               door_key()};
  builtin_count_ = tasks_.size();
}

const TaskDefinition* TaskRegistry::find(const std::string& name) const {
  for (const auto& def : tasks_) {
    if (def.name == name) return &def;
  }
  return nullptr;
}

void TaskRegistry::add(TaskDefinition def) {
  for (auto& existing : tasks_) {
    if (existing.name == def.name) {
      existing = std::move(def);
      return;
    }
  }
  tasks_.push_back(std::move(def));
}

std::optional<std::string> check_params(const TaskDefinition& def, const TaskParams& params) {
  for (const auto& bound : def.bounds) {
    const auto it = params.find(bound.name);
    if (it == params.end()) return bound.name + ": missing";
    if (it->second < bound.min || it->second > bound.max) {
      return bound.name + ": " + std::to_string(it->second) + " outside [" +
             std::to_string(bound.min) + ", " + std::to_string(bound.max) + "]";
    }
  }
  for (const auto& [name, value] : params) {
    const bool known = std::any_of(def.bounds.begin(), def.bounds.end(),
                                   [&](const ParamBound& b) { return b.name == name; });
    if (!known) return name + ": unknown parameter for " + def.name;
  }
  if (def.cross_check) return def.cross_check(params);
  return std::nullopt;
}

GridWorld make_env(const TaskVariantSpec& spec, std::uint64_t env_seed) {
  const TaskDefinition* def = TaskRegistry::instance().find(spec.task_name);
  if (def == nullptr) throw EnvConstructionError("unknown task: " + spec.task_name);
  if (auto problem = check_params(*def, spec.params)) {
    throw EnvConstructionError(spec.task_name + "/" + spec.variant_name + ": " + *problem);
  }
  GridWorldConfig cfg = def->configure(spec.params);
  cfg.fixed_layout = spec.fixed_layout;
  return GridWorld(std::move(cfg), env_seed);
}

}  // namespace harness
