#include "mapfw/solvers.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"
#include "parallel.hpp"

namespace mapfw {

namespace {

// Space-time reservations of already planned (higher priority) agents.
class ReservationTable {
 public:
  explicit ReservationTable(const GridMap& map) : cells_(map.size()), parked_from_(map.size(), kNever) {}

  void reserve(const Path& path, const GridMap& map) {
    const int arrival = static_cast<int>(path.size()) - 1;
    for (int t = 0; t < arrival; ++t) {
      vertex_.insert(key(map.index(path[t]), t));
      edge_.insert(edge_key(map.index(path[t]), map.index(path[t + 1]), t));
      last_transient_[map.index(path[t])] = std::max(last_transient_[map.index(path[t])], t);
    }
    const int goal = map.index(path.back());
    parked_from_[goal] = std::min(parked_from_[goal], arrival);
    horizon_ = std::max(horizon_, arrival + 1);
  }

  bool vertex_blocked(int cell, int t) const {
    return t >= parked_from_[cell] || vertex_.contains(key(cell, t));
  }
  // Moving from -> to between t and t + 1 swaps with a reserved to -> from move.
  bool edge_blocked(int from, int to, int t) const { return edge_.contains(edge_key(to, from, t)); }

  // Earliest time from which an agent may stay on `cell` forever.
  int safe_to_park_from(int cell) const {
    if (parked_from_[cell] != kNever) return kNever;
    auto it = last_transient_.find(cell);
    return it == last_transient_.end() ? 0 : it->second + 1;
  }

  // After this time every constraint is time-invariant.
  int horizon() const { return horizon_; }

 private:
  static constexpr int kNever = std::numeric_limits<int>::max();
  std::uint64_t key(int cell, int t) const {
    return static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(cells_) + static_cast<std::uint64_t>(cell);
  }
  std::uint64_t edge_key(int from, int to, int t) const {
    return (key(from, t) * static_cast<std::uint64_t>(cells_)) + static_cast<std::uint64_t>(to);
  }

  int cells_;
  int horizon_ = 0;
  std::vector<int> parked_from_;
  std::unordered_map<int, int> last_transient_;
  std::unordered_set<std::uint64_t> vertex_;
  std::unordered_set<std::uint64_t> edge_;
};

struct SearchNode {
  int cell;
  int t;
  int parent;
};

std::optional<Path> space_time_astar(const GridMap& map, const AgentTask& task,
                                     const CostField& heuristic, const ReservationTable& table) {
  const int start = map.index(task.start);
  const int goal = map.index(task.goal);
  if (table.vertex_blocked(start, 0)) return std::nullopt;
  const int park_from = table.safe_to_park_from(goal);
  if (park_from == std::numeric_limits<int>::max()) return std::nullopt;

  // Beyond `static_after` constraints no longer depend on time, so states are
  // merged on their cell alone and the search space stays finite.
  const int static_after = std::max(table.horizon(), park_from) + 1;
  auto state_key = [&](int cell, int t) {
    return static_cast<std::uint64_t>(std::min(t, static_after)) * static_cast<std::uint64_t>(map.size()) +
           static_cast<std::uint64_t>(cell);
  };

  std::vector<SearchNode> nodes;
  using Entry = std::tuple<int, int, int>;  // f, -t, node index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::unordered_set<std::uint64_t> closed;

  nodes.push_back({start, 0, -1});
  open.emplace(heuristic.dist[start], 0, 0);
  while (!open.empty()) {
    const auto [f, neg_t, idx] = open.top();
    open.pop();
    const SearchNode node = nodes[idx];
    if (!closed.insert(state_key(node.cell, node.t)).second) continue;
    if (node.cell == goal && node.t >= park_from) {
      Path path;
      for (int i = idx; i != -1; i = nodes[i].parent) path.push_back(map.coord(nodes[i].cell));
      std::reverse(path.begin(), path.end());
      return path;
    }
    const Coord here = map.coord(node.cell);
    for (int a = 0; a < kNumActions; ++a) {
      const Coord next = here + action_delta(static_cast<Action>(a));
      if (!map.is_free(next)) continue;
      const int cell = map.index(next);
      const int t = node.t + 1;
      if (heuristic.dist[cell] == kUnreachable) continue;
      if (table.vertex_blocked(cell, t) || table.edge_blocked(node.cell, cell, node.t)) continue;
      if (closed.contains(state_key(cell, t))) continue;
      nodes.push_back({cell, t, idx});
      open.emplace(t + heuristic.dist[cell], -t, static_cast<int>(nodes.size()) - 1);
    }
  }
  return std::nullopt;
}

}  // namespace

Plan prioritized_plan(const ProblemInstance& instance, std::uint64_t seed, int max_restarts) {
  const int n = instance.num_agents();
  const GridMap& map = instance.map;
  std::vector<CostField> fields = compute_cost_fields(instance);

  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int attempt = 0; attempt <= std::max(0, max_restarts); ++attempt) {
    rng.shuffle(std::span<int>(order));
    ReservationTable table(map);
    Plan plan;
    plan.paths.assign(n, {});
    bool failed = false;
    for (int agent : order) {
      auto path = space_time_astar(map, instance.agents[agent], fields[agent], table);
      if (!path) {
        failed = true;
        break;
      }
      table.reserve(*path, map);
      plan.paths[agent] = std::move(*path);
    }
    if (failed) continue;
    for (const Path& p : plan.paths) {
      const int cost = static_cast<int>(p.size()) - 1;
      plan.makespan = std::max(plan.makespan, cost);
      plan.sum_of_costs += cost;
    }
    return plan;
  }
  throw Error(ErrorCode::Unsolved, "prioritized planning failed after " +
                                       std::to_string(max_restarts) + " restarts");
}

Action greedy_action(const CostField& costfield, Coord pos, const GridMap& map) {
  if (!map.is_free(pos) || !costfield.reachable(pos)) {
    throw Error(ErrorCode::UnreachablePosition, "position has no path to the goal");
  }
  Action best = Action::Wait;
  int best_dist = costfield.at(pos);
  for (Action a : kMoves) {
    const Coord next = pos + action_delta(a);
    if (!map.is_free(next) || !costfield.reachable(next)) continue;
    if (costfield.at(next) < best_dist) {
      best_dist = costfield.at(next);
      best = a;
    }
  }
  return best;
}

namespace {

Action action_between(Coord from, Coord to) {
  for (Action a : kMoves) {
    if (from + action_delta(a) == to) return a;
  }
  return Action::Wait;
}

}  // namespace

Trajectory run_expert_episode(const ProblemInstance& instance, std::uint64_t seed, int max_restarts) {
  return trajectory_from_plan(instance, prioritized_plan(instance, seed, max_restarts));
}

Trajectory trajectory_from_plan(const ProblemInstance& instance, const Plan& plan) {
  const int n = instance.num_agents();
  const std::vector<CostField> fields = compute_cost_fields(instance);

  Trajectory traj;
  traj.instance = instance;
  State state;
  for (const auto& task : instance.agents) state.positions.push_back(task.start);
  ActionHistory history(n);

  auto observe = [&](const State& s) {
    std::vector<ObservationBundle> obs;
    obs.reserve(n);
    for (int i = 0; i < n; ++i) obs.push_back(build_observation(s, i, instance, fields, history));
    return obs;
  };

  traj.states.push_back(state);
  traj.observations.push_back(observe(state));
  auto at = [&](int i, int t) {
    const Path& p = plan.paths[i];
    return p[std::min<std::size_t>(t, p.size() - 1)];
  };
  for (int t = 0; t < plan.makespan; ++t) {
    std::vector<Action> joint(n);
    for (int i = 0; i < n; ++i) joint[i] = action_between(at(i, t), at(i, t + 1));
    StepResult next = step(state, joint, instance.map);
    if (next.resolved != joint) {
      throw Error(ErrorCode::StateInvalid, "expert plan is not executable by the environment");
    }
    history.push_all(next.resolved);
    state = std::move(next.state);
    traj.actions.push_back(std::move(next.resolved));
    traj.states.push_back(state);
    traj.observations.push_back(observe(state));
  }
  return traj;
}

Coord apply_symmetry(Coord p, int sym, int width, int height) {
  if (sym & 1) p.row = height - 1 - p.row;
  if (sym & 2) p.col = width - 1 - p.col;
  if (sym & 4) std::swap(p.row, p.col);
  return p;
}

GridMap transform_map(const GridMap& map, int sym) {
  const bool transpose = sym & 4;
  GridMap out(transpose ? map.height() : map.width(), transpose ? map.width() : map.height());
  out.set_name(map.name());
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) {
      out.set(apply_symmetry({r, c}, sym, map.width(), map.height()), map.at({r, c}));
    }
  return out;
}

ProblemInstance transform_instance(const ProblemInstance& instance, int sym) {
  ProblemInstance out = instance;
  out.map = transform_map(instance.map, sym);
  for (auto& task : out.agents) {
    task.start = apply_symmetry(task.start, sym, instance.map.width(), instance.map.height());
    task.goal = apply_symmetry(task.goal, sym, instance.map.width(), instance.map.height());
  }
  return out;
}

Plan transform_plan(const Plan& plan, const GridMap& map, int sym) {
  Plan out = plan;
  for (Path& path : out.paths)
    for (Coord& p : path) p = apply_symmetry(p, sym, map.width(), map.height());
  return out;
}

ExpertData generate_expert_data(std::span<const GridMap> maps, const ExpertDataConfig& config, int parallelism) {
  if (maps.empty()) throw Error(ErrorCode::PreconditionViolated, "no maps to generate instances on");
  if (config.instances < 0 || config.min_agents < 1 || config.max_agents < config.min_agents) {
    throw Error(ErrorCode::PreconditionViolated, "bad instance count or agent range");
  }
  const int span = config.max_agents - config.min_agents + 1;
  std::vector<std::vector<TrainingSample>> per_instance(config.instances);
  std::vector<char> solved(config.instances, 0);
  detail::parallel_for(per_instance.size(), parallelism, [&](std::size_t i) {
    const GridMap& map = maps[i % maps.size()];
    const int agents = config.min_agents + static_cast<int>(i % span);
    const ProblemInstance inst = generate_instance(map, agents, hash_seed({config.seed, i}));
    Plan plan;
    try {
      plan = prioritized_plan(inst, hash_seed({config.seed, i, 1}), config.max_restarts);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Unsolved) return;
      throw;
    }
    solved[i] = 1;
    const int syms = config.augment_symmetries ? 8 : 1;
    for (int sym = 0; sym < syms; ++sym) {
      const Trajectory traj = trajectory_from_plan(transform_instance(inst, sym), transform_plan(plan, map, sym));
      auto samples = build_training_samples(traj);
      per_instance[i].insert(per_instance[i].end(), std::make_move_iterator(samples.begin()),
                             std::make_move_iterator(samples.end()));
    }
  });
  ExpertData out;
  out.attempted = config.instances;
  for (int i = 0; i < config.instances; ++i) {
    out.solved += solved[i];
    for (auto& s : per_instance[i]) out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace mapfw
