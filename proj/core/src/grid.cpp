#include "mapfw/grid.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"

namespace mapfw {

char action_char(Action a) {
  switch (a) {
    case Action::Up: return 'U';
    case Action::Right: return 'R';
    case Action::Down: return 'D';
    case Action::Left: return 'L';
    case Action::Wait: return 'W';
  }
  return '?';
}

GridMap::GridMap(int width, int height, Cell fill, std::string name)
    : width_(width), height_(height), name_(std::move(name)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::BadDimensions, "grid dimensions must be positive");
  }
  cells_.assign(static_cast<std::size_t>(width) * height, fill);
}

GridMap::GridMap(int width, int height, std::vector<Cell> cells, std::string name)
    : width_(width), height_(height), cells_(std::move(cells)), name_(std::move(name)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::BadDimensions, "grid dimensions must be positive");
  }
  if (cells_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::DimensionMismatch, "cell count does not match width x height");
  }
}

int GridMap::free_count() const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::Free));
}

std::vector<Coord> GridMap::free_cells() const {
  std::vector<Coord> out;
  for (int i = 0; i < size(); ++i) {
    if (cells_[i] == Cell::Free) out.push_back(coord(i));
  }
  return out;
}

namespace {

std::string_view next_line(std::string_view& text) {
  const auto nl = text.find('\n');
  std::string_view line = text.substr(0, nl);
  text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

int parse_header_int(std::string_view line, std::string_view key) {
  if (line.substr(0, key.size()) != key || line.size() <= key.size() + 1 ||
      line[key.size()] != ' ') {
    throw Error(ErrorCode::MalformedHeader, "expected '" + std::string(key) + " N'");
  }
  const std::string digits(line.substr(key.size() + 1));
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(digits, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedHeader, "bad number in '" + std::string(line) + "'");
  }
  if (used != digits.size() || value < 1) {
    throw Error(ErrorCode::MalformedHeader, "bad number in '" + std::string(line) + "'");
  }
  return value;
}

}  // namespace

GridMap load_map(std::string_view text, std::string name) {
  if (next_line(text).substr(0, 4) != "type") {
    throw Error(ErrorCode::MalformedHeader, "missing 'type' line");
  }
  const int height = parse_header_int(next_line(text), "height");
  const int width = parse_header_int(next_line(text), "width");
  if (next_line(text) != "map") throw Error(ErrorCode::MalformedHeader, "missing 'map' line");

  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(width) * height);
  int rows = 0;
  while (!text.empty()) {
    const std::string_view line = next_line(text);
    if (line.empty() && text.empty()) break;
    if (rows == height) {
      throw Error(ErrorCode::DimensionMismatch, "more rows than header height");
    }
    if (static_cast<int>(line.size()) != width) {
      throw Error(ErrorCode::DimensionMismatch,
                  "row " + std::to_string(rows) + " has " + std::to_string(line.size()) +
                      " cells, expected " + std::to_string(width));
    }
    for (char ch : line) {
      switch (ch) {
        case '.':
        case 'G': cells.push_back(Cell::Free); break;
        case '@':
        case 'O':
        case 'T':
        case 'W': cells.push_back(Cell::Obstacle); break;
        default:
          throw Error(ErrorCode::UnknownCellChar, std::string("unknown cell character '") + ch + "'");
      }
    }
    ++rows;
  }
  if (rows != height) {
    throw Error(ErrorCode::DimensionMismatch, "fewer rows than header height");
  }
  return GridMap(width, height, std::move(cells), std::move(name));
}

std::string save_map(const GridMap& map) {
  std::string out = "type octile\nheight " + std::to_string(map.height()) + "\nwidth " +
                    std::to_string(map.width()) + "\nmap\n";
  out.reserve(out.size() + static_cast<std::size_t>(map.size() + map.height()));
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) out += map.at({r, c}) == Cell::Free ? '.' : '@';
    out += '\n';
  }
  return out;
}

GridMap load_map_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string name = path;
  if (auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (auto dot = name.rfind(".map"); dot != std::string::npos && dot + 4 == name.size()) {
    name.resize(dot);
  }
  return load_map(ss.str(), name);
}

void save_map_file(const GridMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << save_map(map);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

CostField bfs_cost_to_goal(const GridMap& map, Coord goal) {
  if (!map.is_free(goal)) throw Error(ErrorCode::GoalOnObstacle, "goal is not a free cell");
  CostField field{goal, map.width(), std::vector<int>(map.size(), kUnreachable)};
  std::deque<Coord> queue{goal};
  field.dist[map.index(goal)] = 0;
  while (!queue.empty()) {
    const Coord u = queue.front();
    queue.pop_front();
    const int du = field.dist[map.index(u)];
    for (Action a : kMoves) {
      const Coord v = u + action_delta(a);
      if (map.is_free(v) && field.dist[map.index(v)] == kUnreachable) {
        field.dist[map.index(v)] = du + 1;
        queue.push_back(v);
      }
    }
  }
  return field;
}

std::vector<int> component_labels(const GridMap& map) {
  std::vector<int> label(map.size(), -1);
  int next = 0;
  std::vector<Coord> stack;
  for (int i = 0; i < map.size(); ++i) {
    if (map.cells()[i] != Cell::Free || label[i] != -1) continue;
    label[i] = next;
    stack.push_back(map.coord(i));
    while (!stack.empty()) {
      const Coord u = stack.back();
      stack.pop_back();
      for (Action a : kMoves) {
        const Coord v = u + action_delta(a);
        if (map.is_free(v) && label[map.index(v)] == -1) {
          label[map.index(v)] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

ProblemInstance generate_instance(const GridMap& map, int n_agents, std::uint64_t seed) {
  std::vector<Coord> free = map.free_cells();
  if (n_agents < 0 || n_agents > static_cast<int>(free.size())) {
    throw Error(ErrorCode::TooManyAgents, std::to_string(n_agents) + " agents but only " +
                                              std::to_string(free.size()) + " free cells");
  }
  constexpr int kMaxGoalTries = 1000;
  Rng rng(seed);
  const std::vector<int> label = component_labels(map);

  std::vector<Coord> starts = free;
  rng.shuffle(std::span<Coord>(starts));
  starts.resize(n_agents);

  // Goals are drawn without replacement; a rejected draw returns to the pool.
  std::vector<Coord> pool = free;
  ProblemInstance inst{map, {}, seed};
  inst.agents.reserve(n_agents);
  for (const Coord s : starts) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxGoalTries && !pool.empty(); ++attempt) {
      const std::size_t k = rng.below(pool.size());
      const Coord g = pool[k];
      if (label[map.index(g)] != label[map.index(s)]) continue;
      pool[k] = pool.back();
      pool.pop_back();
      inst.agents.push_back({s, g});
      placed = true;
      break;
    }
    if (!placed) {
      throw Error(ErrorCode::NoReachableGoal, "no reachable goal found after bounded resampling");
    }
  }
  return inst;
}

void check_state(const State& state, const GridMap& map) {
  std::vector<char> seen(map.size(), 0);
  for (const Coord p : state.positions) {
    if (!map.is_free(p)) throw Error(ErrorCode::StateInvalid, "agent on obstacle or off map");
    if (seen[map.index(p)]++) throw Error(ErrorCode::StateInvalid, "duplicate agent positions");
  }
}

namespace {

struct CoordHash {
  std::size_t operator()(Coord c) const noexcept {
    return std::hash<long long>{}((static_cast<long long>(c.row) << 32) ^ static_cast<unsigned>(c.col));
  }
};

// One pass of the conflict rules; returns true when any action changed.
bool resolve_pass(const State& state, std::vector<Action>& act, std::vector<Coord>& target) {
  const std::size_t n = act.size();
  bool changed = false;
  auto set_wait = [&](std::size_t i) {
    if (act[i] != Action::Wait) {
      act[i] = Action::Wait;
      target[i] = state.positions[i];
      changed = true;
    }
  };

  std::unordered_map<Coord, std::vector<std::size_t>, CoordHash> by_target;
  std::unordered_map<Coord, std::size_t, CoordHash> occupant;
  for (std::size_t i = 0; i < n; ++i) {
    by_target[target[i]].push_back(i);
    occupant[state.positions[i]] = i;
  }
  for (auto& [cell, group] : by_target) {
    if (group.size() > 1) {
      for (auto i : group) set_wait(i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (act[i] == Action::Wait) continue;
    auto it = occupant.find(target[i]);
    if (it == occupant.end()) continue;
    const std::size_t j = it->second;
    if (act[j] == Action::Wait) {
      set_wait(i);
    } else if (target[j] == state.positions[i]) {
      set_wait(i);
      set_wait(j);
    }
  }
  return changed;
}

}  // namespace

std::vector<Action> resolve_joint_action(const State& state, const std::vector<Action>& joint,
                                         const GridMap& map) {
  if (joint.size() != state.positions.size()) {
    throw Error(ErrorCode::StateInvalid, "joint action size does not match agent count");
  }
  check_state(state, map);
  std::vector<Action> act = joint;
  std::vector<Coord> target(act.size());
  for (std::size_t i = 0; i < act.size(); ++i) {
    if (static_cast<int>(act[i]) >= kNumActions) act[i] = Action::Wait;
    target[i] = state.positions[i] + action_delta(act[i]);
    if (!map.is_free(target[i])) {
      act[i] = Action::Wait;
      target[i] = state.positions[i];
    }
  }
  while (resolve_pass(state, act, target)) {
  }
  return act;
}

bool is_conflict_free(const State& state, const std::vector<Action>& joint, const GridMap& map) {
  std::vector<Action> act = joint;
  std::vector<Coord> target(act.size());
  for (std::size_t i = 0; i < act.size(); ++i) {
    target[i] = state.positions[i] + action_delta(act[i]);
    if (!map.is_free(target[i])) return false;
  }
  return !resolve_pass(state, act, target);
}

StepResult step(const State& state, const std::vector<Action>& joint, const GridMap& map) {
  StepResult out{state, resolve_joint_action(state, joint, map)};
  for (std::size_t i = 0; i < out.resolved.size(); ++i) {
    out.state.positions[i] = state.positions[i] + action_delta(out.resolved[i]);
  }
  out.state.step = state.step + 1;
  return out;
}

bool is_success(const State& state, const ProblemInstance& instance) {
  for (std::size_t i = 0; i < instance.agents.size(); ++i) {
    if (state.positions[i] != instance.agents[i].goal) return false;
  }
  return true;
}

ValidationReport validate_plan(const ProblemInstance& instance, const std::vector<Path>& paths) {
  const std::size_t n = instance.agents.size();
  if (paths.size() != n) throw Error(ErrorCode::EmptyPath, "path count does not match agent count");
  std::size_t horizon = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (paths[i].empty()) throw Error(ErrorCode::EmptyPath, "agent " + std::to_string(i));
    if (paths[i][0] != instance.agents[i].start) {
      throw Error(ErrorCode::WrongStart, "agent " + std::to_string(i));
    }
    horizon = std::max(horizon, paths[i].size());
  }
  auto at = [&](std::size_t i, std::size_t t) {
    return t < paths[i].size() ? paths[i][t] : paths[i].back();
  };

  ValidationReport report;
  const GridMap& map = instance.map;
  for (std::size_t t = 0; t < horizon; ++t) {
    std::map<Coord, std::vector<int>> occupancy;
    for (std::size_t i = 0; i < n; ++i) {
      const Coord p = at(i, t);
      if (!map.is_free(p)) {
        report.violations.push_back({static_cast<int>(t), ViolationKind::ObstacleEntry, {static_cast<int>(i)}});
      }
      occupancy[p].push_back(static_cast<int>(i));
      if (t > 0) {
        const Coord d = p - at(i, t - 1);
        if (std::abs(d.row) + std::abs(d.col) > 1) {
          report.violations.push_back({static_cast<int>(t), ViolationKind::Teleport, {static_cast<int>(i)}});
        }
      }
    }
    for (auto& [cell, group] : occupancy) {
      if (group.size() > 1) {
        report.violations.push_back({static_cast<int>(t), ViolationKind::VertexCollision, group});
      }
    }
    if (t == 0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const Coord pi0 = at(i, t - 1), pi1 = at(i, t);
      if (pi0 == pi1) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (at(j, t - 1) == pi1 && at(j, t) == pi0) {
          report.violations.push_back(
              {static_cast<int>(t), ViolationKind::EdgeCollision, {static_cast<int>(i), static_cast<int>(j)}});
        }
      }
    }
  }
  report.ok = report.violations.empty();
  return report;
}

}  // namespace mapfw
