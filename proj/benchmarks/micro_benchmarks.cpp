#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "mapfw/grid.hpp"
#include "mapfw/mapgen.hpp"
#include "mapfw/neural.hpp"
#include "mapfw/policy.hpp"
#include "mapfw/solvers.hpp"
#include "mapfw/tokenizer.hpp"

using namespace mapfw;

namespace {

ProblemInstance random_instance(int side, int agents, std::uint64_t seed) {
  return generate_instance(gen_random(side, side, 0.2, seed), agents, seed);
}

void BM_EnvironmentStep(benchmark::State& st) {
  const ProblemInstance inst = random_instance(17, static_cast<int>(st.range(0)), 1);
  State s;
  for (const auto& a : inst.agents) s.positions.push_back(a.start);
  std::vector<Action> joint(inst.num_agents());
  for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = static_cast<Action>(i % kNumActions);
  for (auto _ : st) benchmark::DoNotOptimize(step(s, joint, inst.map));
}
BENCHMARK(BM_EnvironmentStep)->Arg(4)->Arg(16)->Arg(64);

void BM_BuildObservation(benchmark::State& st) {
  const ProblemInstance inst = random_instance(17, 16, 2);
  const auto fields = compute_cost_fields(inst);
  State s;
  for (const auto& a : inst.agents) s.positions.push_back(a.start);
  const ActionHistory history(inst.num_agents());
  for (auto _ : st) benchmark::DoNotOptimize(build_observation(s, 0, inst, fields, history));
}
BENCHMARK(BM_BuildObservation);

void BM_PrioritizedPlan(benchmark::State& st) {
  const ProblemInstance inst = random_instance(10, static_cast<int>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(prioritized_plan(inst, 7));
}
BENCHMARK(BM_PrioritizedPlan)->Arg(2)->Arg(6);

void BM_ForwardToy(benchmark::State& st) {
  const ModelParams params = ModelParams::init(ModelConfig::toy(), 1);
  const ProblemInstance inst = random_instance(17, 8, 4);
  Environment env(inst);
  const ObservationBundle obs = env.observe(0);
  for (auto _ : st) benchmark::DoNotOptimize(forward(params, obs.tokens, obs.meta));
}
BENCHMARK(BM_ForwardToy)->Unit(benchmark::kMillisecond);

void BM_LossAndGradientToy(benchmark::State& st) {
  const ModelParams params = ModelParams::init(ModelConfig::toy(), 1);
  const auto samples = build_training_samples(run_expert_episode(random_instance(10, 4, 5), 5));
  const std::vector<TrainingSample> batch(samples.begin(), samples.begin() + std::min<std::size_t>(16, samples.size()));
  ParamVector grad;
  for (auto _ : st) benchmark::DoNotOptimize(loss_and_gradient(params, batch, grad));
}
BENCHMARK(BM_LossAndGradientToy)->Unit(benchmark::kMillisecond);

void BM_RasterizeFixture(benchmark::State& st) {
  std::ifstream f(std::string(MAPFW_FIXTURE_DIR) + "/crossroads.osm");
  std::stringstream ss;
  ss << f.rdbuf();
  const GeoFeatures features = parse_osm(ss.str());
  const RasterConfig config;
  for (auto _ : st) benchmark::DoNotOptimize(morph_clean(rasterize(features, config), config));
}
BENCHMARK(BM_RasterizeFixture);

}  // namespace

BENCHMARK_MAIN();
