#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mapfw/grid.hpp"
#include "mapfw/tokenizer.hpp"

namespace mapfw {

struct Plan {
  std::vector<Path> paths;
  int makespan = 0;
  int sum_of_costs = 0;
};

inline constexpr int kDefaultMaxRestarts = 20;

// Randomized-priority prioritized planning with space-time A*. Throws
// Error(Unsolved) once every restart has failed.
Plan prioritized_plan(const ProblemInstance& instance, std::uint64_t seed,
                      int max_restarts = kDefaultMaxRestarts);

Action greedy_action(const CostField& costfield, Coord pos, const GridMap& map);

struct Trajectory {
  ProblemInstance instance;
  std::vector<State> states;                          // makespan + 1 entries
  std::vector<std::vector<Action>> actions;           // makespan entries, resolved joint actions
  std::vector<std::vector<ObservationBundle>> observations;  // [t][agent], makespan + 1 entries

  int makespan() const { return static_cast<int>(actions.size()); }
};

Trajectory run_expert_episode(const ProblemInstance& instance, std::uint64_t seed,
                              int max_restarts = kDefaultMaxRestarts);

// Replays a plan through step(), recording observations at every step.
Trajectory trajectory_from_plan(const ProblemInstance& instance, const Plan& plan);

// The 8 symmetries of the square: bit 0 flips rows, bit 1 flips columns,
// bit 2 then transposes. Used to augment expert data.
Coord apply_symmetry(Coord p, int sym, int width, int height);
GridMap transform_map(const GridMap& map, int sym);
ProblemInstance transform_instance(const ProblemInstance& instance, int sym);
Plan transform_plan(const Plan& plan, const GridMap& map, int sym);

struct ExpertDataConfig {
  int instances = 100;
  int min_agents = 1;
  int max_agents = 4;
  std::uint64_t seed = 0;
  int max_restarts = kDefaultMaxRestarts;
  // Also replay every solved plan under the 7 other square symmetries.
  bool augment_symmetries = false;
};

struct ExpertData {
  std::vector<TrainingSample> samples;
  int attempted = 0;
  int solved = 0;

  double solve_rate() const { return attempted > 0 ? static_cast<double>(solved) / attempted : 0.0; }
};

// Instance i uses maps[i % maps.size()], min_agents + i % (agent range) agents
// and seed hash(seed, i); unsolved instances are skipped. Samples are ordered
// by instance index regardless of parallelism.
ExpertData generate_expert_data(std::span<const GridMap> maps, const ExpertDataConfig& config,
                                int parallelism = 1);

}  // namespace mapfw
