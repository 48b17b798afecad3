#include "mapfw/policy.hpp"

#include <numeric>

#include "mapfw/error.hpp"

namespace mapfw {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Fast: return "fast";
    case Mode::Slow: return "slow";
    case Mode::Thinking: return "thinking";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "fast") return Mode::Fast;
  if (name == "slow") return Mode::Slow;
  if (name == "thinking") return Mode::Thinking;
  throw Error(ErrorCode::BadConfig, "unknown mode '" + std::string(name) + "'");
}

void ModeConfig::validate() const {
  if (mode != Mode::Fast && horizon < 2) {
    throw Error(ErrorCode::PreconditionViolated, std::string(mode_name(mode)) + " mode requires H >= 2");
  }
}

void PredictionCache::clear() {
  for (auto& m : per_agent) m.clear();
}

Environment::Environment(const ProblemInstance& instance)
    : instance_(&instance),
      fields_(compute_cost_fields(instance)),
      history_(instance.num_agents()),
      paths_(instance.num_agents()) {
  for (int i = 0; i < instance.num_agents(); ++i) {
    state_.positions.push_back(instance.agents[i].start);
    paths_[i].push_back(instance.agents[i].start);
  }
  check_state(state_, instance.map);
}

ObservationBundle Environment::observe(int ego, const NeighborActions* est_override) const {
  return build_observation(state_, ego, *instance_, fields_, history_, est_override);
}

std::vector<Action> Environment::apply(const std::vector<Action>& proposal) {
  StepResult r = step(state_, proposal, instance_->map);
  for (std::size_t i = 0; i < proposal.size(); ++i) {
    if (r.resolved[i] != proposal[i]) ++collisions_;
    paths_[i].push_back(r.state.positions[i]);
  }
  history_.push_all(r.resolved);
  state_ = std::move(r.state);
  return r.resolved;
}

Action argmax_action(const ActionLogits& logits) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (logits[a] > logits[best]) best = a;
  return static_cast<Action>(best);
}

Action fast_decide(const ModelParams& params, const ObservationBundle& obs) {
  return argmax_action(forward(params, obs.tokens, obs.meta).action_logits);
}

SlowDecision slow_decide(const ModelParams& params, const ObservationBundle& obs, NeighborActions& cache) {
  const ForwardOutput out = forward(params, obs.tokens, obs.meta);
  SlowDecision d;
  d.action = argmax_action(out.action_logits);
  d.predicted = out.predicted_tokens();
  d.neighbors = extract_predicted_neighbor_actions(d.predicted, obs.slot_agents);
  // Replacing the map evicts agents that are no longer in view.
  cache = d.neighbors;
  return d;
}

std::vector<std::vector<Action>> thinking_cycle(const ModelParams& params, Environment& env,
                                                std::span<const int> egos, int horizon, int steps_left) {
  if (horizon < 2) throw Error(ErrorCode::PreconditionViolated, "thinking mode requires H >= 2");
  const int n = env.instance().num_agents();
  std::vector<std::vector<Action>> executed;
  std::vector<TokenSeq> imagined(n);
  for (int h = 0; h < horizon && steps_left > 0 && !env.success(); ++h, --steps_left) {
    std::vector<Action> joint(n, Action::Wait);
    for (int ego : egos) {
      ForwardOutput out;
      if (h == 0) {
        const ObservationBundle obs = env.observe(ego);
        out = forward(params, obs.tokens, obs.meta);
      } else {
        out = forward(params, imagined[ego], sre_meta_from_tokens(imagined[ego]));
      }
      joint[ego] = argmax_action(out.action_logits);
      imagined[ego] = out.predicted_tokens();
    }
    executed.push_back(env.apply(joint));
  }
  return executed;
}

namespace {

void finish(EpisodeResult& r, const Environment& env) {
  const ProblemInstance& inst = env.instance();
  r.paths = env.paths();
  r.success = env.success();
  r.steps_used = env.state().step;
  r.collisions_resolved = env.collisions_resolved();
  r.makespan = 0;
  r.sum_of_costs = 0;
  for (int i = 0; i < inst.num_agents(); ++i) {
    const Path& p = r.paths[i];
    int arrive = static_cast<int>(p.size()) - 1;
    while (arrive > 0 && p[arrive - 1] == inst.agents[i].goal) --arrive;
    if (p[arrive] != inst.agents[i].goal) arrive = static_cast<int>(p.size()) - 1;
    r.makespan = std::max(r.makespan, arrive);
    r.sum_of_costs += arrive;
  }
}

}  // namespace

EpisodeResult run_episode(const ProblemInstance& instance, const ModelParams& params, const ModeConfig& mode,
                          int step_limit, std::uint64_t /*seed*/) {
  if (step_limit <= 0) throw Error(ErrorCode::PreconditionViolated, "step_limit must be positive");
  mode.validate();
  Environment env(instance);
  const int n = instance.num_agents();
  EpisodeResult result;

  if (mode.mode == Mode::Thinking) {
    std::vector<int> egos(n);
    std::iota(egos.begin(), egos.end(), 0);
    while (!env.success() && env.state().step < step_limit) {
      thinking_cycle(params, env, egos, mode.horizon, step_limit - env.state().step);
    }
    finish(result, env);
    return result;
  }

  PredictionCache cache(n);
  while (!env.success() && env.state().step < step_limit) {
    std::vector<Action> joint(n);
    if (mode.mode == Mode::Fast) {
      for (int i = 0; i < n; ++i) joint[i] = fast_decide(params, env.observe(i));
    } else {
      cache.phase = env.state().step % mode.horizon;
      const bool resync = cache.phase == 0 && mode.greedy_resync;
      if (resync) cache.clear();
      for (int i = 0; i < n; ++i) {
        const ObservationBundle obs = env.observe(i, resync ? nullptr : &cache.per_agent[i]);
        joint[i] = slow_decide(params, obs, cache.per_agent[i]).action;
      }
    }
    env.apply(joint);
  }
  finish(result, env);
  return result;
}

}  // namespace mapfw
