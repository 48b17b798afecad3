#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mapfw/grid.hpp"
#include "mapfw/neural.hpp"
#include "mapfw/tokenizer.hpp"

namespace mapfw {

enum class Mode { Fast, Slow, Thinking };

const char* mode_name(Mode m);
Mode parse_mode(std::string_view name);

struct ModeConfig {
  Mode mode = Mode::Fast;
  int horizon = 2;  // H, used by Slow and Thinking
  bool greedy_resync = true;

  // Throws PreconditionViolated when H < 2 for Slow/Thinking.
  void validate() const;
};

struct EpisodeResult {
  bool success = false;
  int steps_used = 0;
  std::vector<Path> paths;
  int makespan = 0;       // step at which the last agent reached its goal for good
  int sum_of_costs = 0;
  int collisions_resolved = 0;  // agent-steps whose proposal was turned into Wait
};

// Per-ego neighbor predictions from the previous slow-head output.
struct PredictionCache {
  std::vector<NeighborActions> per_agent;
  int phase = 0;

  explicit PredictionCache(int n_agents = 0) : per_agent(n_agents) {}
  void clear();
};

// Live episode state shared by the decision procedures.
class Environment {
 public:
  explicit Environment(const ProblemInstance& instance);

  const ProblemInstance& instance() const { return *instance_; }
  const State& state() const { return state_; }
  const ActionHistory& history() const { return history_; }
  std::span<const CostField> cost_fields() const { return fields_; }
  const std::vector<Path>& paths() const { return paths_; }
  int collisions_resolved() const { return collisions_; }
  bool success() const { return is_success(state_, *instance_); }

  ObservationBundle observe(int ego, const NeighborActions* est_override = nullptr) const;
  // Applies the joint proposal through step(); returns the resolved actions.
  std::vector<Action> apply(const std::vector<Action>& proposal);

 private:
  const ProblemInstance* instance_;
  std::vector<CostField> fields_;
  State state_;
  ActionHistory history_;
  std::vector<Path> paths_;
  int collisions_ = 0;
};

// Argmax over action logits, lowest code on ties.
Action argmax_action(const ActionLogits& logits);

Action fast_decide(const ModelParams& params, const ObservationBundle& obs);

struct SlowDecision {
  Action action = Action::Wait;
  TokenSeq predicted{};
  NeighborActions neighbors;
};

// `obs` must already carry the cache overrides for this phase.
SlowDecision slow_decide(const ModelParams& params, const ObservationBundle& obs, NeighborActions& cache);

// Runs one Thinking cycle of up to H steps (stops early on success or when
// `steps_left` runs out). Agents outside `egos` wait. Returns executed joint actions.
std::vector<std::vector<Action>> thinking_cycle(const ModelParams& params, Environment& env,
                                                std::span<const int> egos, int horizon,
                                                int steps_left);

// Decentralized episode loop; ends on success or after step_limit steps.
// The policies are deterministic argmax decoders, so `seed` is recorded but
// does not influence the outcome.
EpisodeResult run_episode(const ProblemInstance& instance, const ModelParams& params,
                          const ModeConfig& mode, int step_limit, std::uint64_t seed = 0);

}  // namespace mapfw
