#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mapfw {

enum class Cell : std::uint8_t { Free = 0, Obstacle = 1 };

// (row, col); Up decreases row, Right increases col.
struct Coord {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(Coord, Coord) = default;
  friend constexpr auto operator<=>(Coord, Coord) = default;
  friend constexpr Coord operator+(Coord a, Coord b) { return {a.row + b.row, a.col + b.col}; }
  friend constexpr Coord operator-(Coord a, Coord b) { return {a.row - b.row, a.col - b.col}; }
};

enum class Action : std::uint8_t { Up = 0, Right = 1, Down = 2, Left = 3, Wait = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, 4> kMoves = {Action::Up, Action::Right, Action::Down,
                                                 Action::Left};

constexpr Coord action_delta(Action a) {
  switch (a) {
    case Action::Up: return {-1, 0};
    case Action::Right: return {0, 1};
    case Action::Down: return {1, 0};
    case Action::Left: return {0, -1};
    case Action::Wait: break;
  }
  return {0, 0};
}

char action_char(Action a);

class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height, Cell fill = Cell::Free, std::string name = {});
  GridMap(int width, int height, std::vector<Cell> cells, std::string name = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int size() const noexcept { return width_ * height_; }
  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  bool in_bounds(Coord c) const noexcept {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  bool is_free(Coord c) const noexcept { return in_bounds(c) && at(c) == Cell::Free; }

  Cell at(Coord c) const { return cells_[index(c)]; }
  void set(Coord c, Cell v) { cells_[index(c)] = v; }

  int index(Coord c) const noexcept { return c.row * width_ + c.col; }
  Coord coord(int idx) const noexcept { return {idx / width_, idx % width_}; }

  const std::vector<Cell>& cells() const noexcept { return cells_; }
  int free_count() const;
  std::vector<Coord> free_cells() const;

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Cell> cells_;
  std::string name_;
};

struct AgentTask {
  Coord start;
  Coord goal;
  friend bool operator==(const AgentTask&, const AgentTask&) = default;
};

struct ProblemInstance {
  GridMap map;
  std::vector<AgentTask> agents;
  std::uint64_t seed = 0;

  int num_agents() const noexcept { return static_cast<int>(agents.size()); }
  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

struct State {
  std::vector<Coord> positions;
  int step = 0;
  friend bool operator==(const State&, const State&) = default;
};

inline constexpr int kUnreachable = -1;

struct CostField {
  Coord goal;
  int width = 0;
  std::vector<int> dist;  // row-major, kUnreachable for blocked or disconnected cells

  int at(Coord c) const { return dist[c.row * width + c.col]; }
  bool reachable(Coord c) const { return at(c) != kUnreachable; }
};

enum class ViolationKind { VertexCollision, EdgeCollision, ObstacleEntry, Teleport };

struct Violation {
  int step = 0;
  ViolationKind kind = ViolationKind::VertexCollision;
  std::vector<int> agents;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

using Path = std::vector<Coord>;

// MovingAI .map text.
GridMap load_map(std::string_view text, std::string name = {});
std::string save_map(const GridMap& map);
GridMap load_map_file(const std::string& path);
void save_map_file(const GridMap& map, const std::string& path);

CostField bfs_cost_to_goal(const GridMap& map, Coord goal);

// Connected-component label per cell (-1 on obstacles), 4-connectivity.
std::vector<int> component_labels(const GridMap& map);

ProblemInstance generate_instance(const GridMap& map, int n_agents, std::uint64_t seed);

struct StepResult {
  State state;
  std::vector<Action> resolved;
};

// Applies a joint action. Invalid or conflicting moves are turned into Wait
// until the joint action is conflict-free.
StepResult step(const State& state, const std::vector<Action>& joint, const GridMap& map);

// Resolution alone, without applying; exposed for fixed-point checks.
std::vector<Action> resolve_joint_action(const State& state, const std::vector<Action>& joint,
                                         const GridMap& map);

// True when the resolved joint action has no vertex, edge, or wait-chain conflict.
bool is_conflict_free(const State& state, const std::vector<Action>& joint, const GridMap& map);

void check_state(const State& state, const GridMap& map);

bool is_success(const State& state, const ProblemInstance& instance);

ValidationReport validate_plan(const ProblemInstance& instance, const std::vector<Path>& paths);

}  // namespace mapfw
