// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
//
// usage: mapfw_acceptance [--out DIR] [--train-steps N] [N ...]
//   --out DIR          where suite CSV/SVG and the training log are archived
//   --train-steps N    optimizer steps for the end-to-end model (default 1500)
//   N ...              run only the listed criteria (1-12)
//
// Criteria 9 and 10 use the model trained by criterion 8; it is trained on
// demand when 8 is not selected. Criterion 9 checks expected directions only
// and reports WARN instead of FAIL on an inversion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mapfw/bench.hpp"
#include "mapfw/error.hpp"
#include "mapfw/grid.hpp"
#include "mapfw/mapgen.hpp"
#include "mapfw/neural.hpp"
#include "mapfw/policy.hpp"
#include "mapfw/rng.hpp"
#include "mapfw/solvers.hpp"
#include "mapfw/tokenizer.hpp"

using namespace mapfw;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Warn };

struct Outcome {
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Options {
  fs::path out_dir = "acceptance_artifacts";
  int train_steps = 1500;
  std::set<int> only;
};

struct TrainedModels {
  ModelParams with_sre;
  ModelParams without_sre;
  double train_seconds = 0.0;
};

GridMap random_grid(int w, int h, double density, Rng& rng) {
  GridMap m(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (rng.uniform() < density) m.set({r, c}, Cell::Obstacle);
  if (m.free_count() < 2) {
    m.set({0, 0}, Cell::Free);
    m.set({0, 1}, Cell::Free);
  }
  return m;
}

// Agents that fit in the largest connected component, capped at `cap`.
int agents_that_fit(const GridMap& map, int cap) {
  std::map<int, int> sizes;
  for (int label : component_labels(map))
    if (label >= 0) ++sizes[label];
  int best = 0;
  for (auto& [label, n] : sizes) best = std::max(best, n);
  return std::max(1, std::min(cap, best / 2));
}

// ---------------------------------------------------------------------------
// 1. Environment oracle

Outcome environment_oracle() {
  const auto t0 = Clock::now();
  Rng rng(hash_seed({0xA1}));
  constexpr int kCalls = 10000;
  constexpr int kEpisodeLen = 40;
  int calls = 0, episodes = 0, violations = 0;
  while (calls < kCalls) {
    const int w = 5 + static_cast<int>(rng.below(5));
    const int h = 5 + static_cast<int>(rng.below(5));
    GridMap map = random_grid(w, h, 0.1 + 0.3 * rng.uniform(), rng);
    const int n = 1 + static_cast<int>(rng.below(agents_that_fit(map, 8)));
    ProblemInstance inst;
    try {
      inst = generate_instance(map, n, rng.next_u64());
    } catch (const Error&) {
      continue;
    }
    State s{{}, 0};
    for (const auto& a : inst.agents) s.positions.push_back(a.start);
    std::vector<Path> paths(n);
    for (int i = 0; i < n; ++i) paths[i].push_back(s.positions[i]);
    for (int t = 0; t < kEpisodeLen && calls < kCalls; ++t, ++calls) {
      std::vector<Action> joint(n);
      for (auto& a : joint) a = static_cast<Action>(rng.below(5));
      s = step(s, joint, inst.map).state;
      for (int i = 0; i < n; ++i) paths[i].push_back(s.positions[i]);
    }
    ++episodes;
    violations += static_cast<int>(validate_plan(inst, paths).violations.size());
  }
  const double secs = seconds_since(t0);
  const bool ok = violations == 0 && secs < 10.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("%d step calls over %d episodes, %d violations, %.2fs (limit 10s)", calls, episodes, violations, secs)};
}

// ---------------------------------------------------------------------------
// 2. Expert validity

Outcome expert_validity() {
  const auto t0 = Clock::now();
  constexpr int kInstances = 1000;
  int solved = 0, invalid = 0, off_goal = 0, attempted = 0;
  Rng rng(hash_seed({0xA2}));
  while (attempted < kInstances) {
    GridMap map = gen_random(10, 10, 0.2, rng.next_u64());
    const int n = 1 + static_cast<int>(rng.below(agents_that_fit(map, 6)));
    ProblemInstance inst;
    try {
      inst = generate_instance(map, n, rng.next_u64());
    } catch (const Error&) {
      continue;
    }
    ++attempted;
    try {
      Plan plan = prioritized_plan(inst, rng.next_u64());
      ++solved;
      if (!validate_plan(inst, plan.paths).ok) ++invalid;
      for (int i = 0; i < n; ++i)
        if (plan.paths[i].back() != inst.agents[i].goal) {
          ++off_goal;
          break;
        }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unsolved) throw;
    }
  }
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(solved) / attempted;
  const bool ok = invalid == 0 && off_goal == 0 && rate >= 0.95 && secs < 120.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("solved %d/%d (%.3f, need 0.95), %d invalid, %d off goal, %.1fs (limit 120s)", solved, attempted, rate,
              invalid, off_goal, secs)};
}

// ---------------------------------------------------------------------------
// 3. Tokenizer exactness

Outcome tokenizer_exactness() {
  constexpr int kObservations = 10000;
  Rng rng(hash_seed({0xA3}));
  int checked = 0, bad = 0;
  std::vector<TrainingSample> samples;
  while (checked < kObservations) {
    const int side = 6 + static_cast<int>(rng.below(20));
    GridMap map = random_grid(side, side, 0.3 * rng.uniform(), rng);
    const int n = 1 + static_cast<int>(rng.below(agents_that_fit(map, 20)));
    ProblemInstance inst;
    try {
      inst = generate_instance(map, n, rng.next_u64());
    } catch (const Error&) {
      continue;
    }
    const auto fields = compute_cost_fields(inst);
    // Random reachable state: scatter agents over distinct free cells of the
    // component their goal lives in, with random action histories.
    State s{{}, static_cast<int>(rng.below(50))};
    const auto labels = component_labels(inst.map);
    std::vector<Coord> free = inst.map.free_cells();
    std::set<Coord> used;
    for (int i = 0; i < n; ++i) {
      const int want = labels[inst.agents[i].goal.row * inst.map.width() + inst.agents[i].goal.col];
      Coord pick = inst.agents[i].start;
      for (int tries = 0; tries < 20; ++tries) {
        Coord c = free[rng.below(free.size())];
        if (!used.contains(c) && labels[c.row * inst.map.width() + c.col] == want) {
          pick = c;
          break;
        }
      }
      if (used.contains(pick)) pick = inst.agents[i].start;
      if (used.contains(pick)) break;
      used.insert(pick);
      s.positions.push_back(pick);
    }
    if (static_cast<int>(s.positions.size()) != n) continue;
    ActionHistory hist(n);
    const int pushes = static_cast<int>(rng.below(8));
    for (int k = 0; k < pushes; ++k)
      for (int i = 0; i < n; ++i) hist.push(i, static_cast<Action>(rng.below(5)));
    for (int ego = 0; ego < n && checked < kObservations; ++ego, ++checked) {
      ObservationBundle obs = build_observation(s, ego, inst, fields, hist);
      bool good = obs.tokens.size() == 256;
      for (int k = 251; k < 256; ++k) good &= obs.tokens[k] == vocab::kPad;
      good &= obs.tokens[60] == vocab::cost_delta(0);
      for (TokenId t : obs.tokens) good &= t < vocab::kSize;
      bad += !good;
    }
  }
  // Dataset round trip on expert samples.
  for (int e = 0; e < 40; ++e) {
    GridMap map = gen_random(12, 12, 0.15, hash_seed({0xA3, static_cast<std::uint64_t>(e)}));
    try {
      ProblemInstance inst = generate_instance(map, 1 + e % 6, e);
      auto s = build_training_samples(run_expert_episode(inst, e));
      samples.insert(samples.end(), s.begin(), s.end());
    } catch (const Error&) {
    }
  }
  const std::string bytes = encode_dataset(samples);
  const Dataset back = decode_dataset(bytes);
  bool same = back.samples.size() == samples.size() && encode_dataset(back.samples) == bytes;
  for (std::size_t i = 0; same && i < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = back.samples[i];
    // Slot-to-agent ids, ego index and step are bookkeeping and not stored.
    same = a.input.tokens == b.input.tokens && a.input.meta == b.input.meta && a.target_tokens == b.target_tokens && a.target_action == b.target_action &&
           a.real_action == b.real_action && a.estimated_action == b.estimated_action;
  }
  const bool ok = bad == 0 && same;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("%d/%d fuzzed observations exact; dataset round trip of %zu samples %s", checked - bad, checked,
              samples.size(), same ? "bit-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 4. SRE structure

Outcome sre_structure() {
  ModelConfig cfg = ModelConfig::toy();
  ModelParams p = ModelParams::init(cfg, 17);
  const int d = cfg.d_model;
  Rng rng(hash_seed({0xA4}));
  int checked = 0, bad = 0;
  while (checked < 1000) {
    GridMap map = gen_random(16, 16, 0.2, rng.next_u64());
    ProblemInstance inst;
    try {
      inst = generate_instance(map, 1 + static_cast<int>(rng.below(agents_that_fit(map, 16))), rng.next_u64());
    } catch (const Error&) {
      continue;
    }
    const auto fields = compute_cost_fields(inst);
    State s{{}, 0};
    for (const auto& a : inst.agents) s.positions.push_back(a.start);
    ActionHistory hist(inst.num_agents());
    for (int ego = 0; ego < inst.num_agents() && checked < 1000; ++ego, ++checked) {
      ObservationBundle obs = build_observation(s, ego, inst, fields, hist);
      const auto enc = sre_encode(obs.meta, p);
      auto row = [&](int k) { return std::vector<double>(enc.begin() + k * d, enc.begin() + (k + 1) * d); };
      const std::vector<double> zero(d, 0.0);
      bool good = enc.size() == static_cast<std::size_t>(256 * d);
      for (int slot = 0; slot < layout::kAgentSlots; ++slot) {
        const int b = layout::slot_pos(slot, 0);
        if (!obs.meta.slots[slot].occupied) {
          for (int j = 0; j < 10; ++j) good &= row(b + j) == zero;
          continue;
        }
        good &= row(b) == row(b + 1) && row(b + 2) == row(b + 3);
        for (int j = 5; j < 10; ++j) good &= row(b + 4) == row(b + j);
        // Position rows share the cost-map encoding of the same offset.
        const Coord rp = obs.meta.slots[slot].rel_pos;
        if (std::abs(rp.row) <= 5 && std::abs(rp.col) <= 5) good &= row(b) == row((rp.row + 5) * 11 + rp.col + 5);
      }
      for (int k = layout::kTailBase; k < 256; ++k) good &= row(k) == zero;
      bad += !good;
    }
  }
  std::set<std::array<double, 3>> seen;
  for (int k = 0; k < layout::kCostMapTokens; ++k) {
    const Coord o = layout::costmap_offset(k);
    seen.insert(polar(o.row, o.col));
  }
  const bool ok = bad == 0 && seen.size() == 121;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("%d/%d observations match the 2+2+6 pattern with zero tail rows; %zu distinct polar codes of 121",
              checked - bad, checked, seen.size())};
}

// ---------------------------------------------------------------------------
// 5. Loss exactness

Outcome loss_exactness() {
  // Crafted sample: one occupied ego segment, the rest Pad.
  TrainingSample s;
  s.target_tokens.fill(vocab::kPad);
  for (int k = 0; k < 121; ++k) s.target_tokens[k] = vocab::cost_delta(k % 21 - 10);
  const int b = layout::slot_pos(0, 0);
  for (int j = 0; j < 4; ++j) s.target_tokens[b + j] = vocab::kCoordBase + 15 + j;
  for (int j = 4; j < 10; ++j) s.target_tokens[b + j] = vocab::action(static_cast<Action>(j % 5));
  for (int j = 4; j < 9; ++j) s.real_action.set(b + j);
  s.estimated_action.set(b + 9);
  s.target_action = Action::Right;

  // Target logit 1.0 on cost-map rows, 3.0 elsewhere, all other logits 0.
  std::vector<double> slow(256 * 60, 0.0);
  for (int k = 0; k < 256; ++k) slow[k * 60 + s.target_tokens[k]] = k < 121 ? 1.0 : 3.0;
  ActionLogits fast{0.0, 1.0, 2.0, 3.0, 4.0};

  const double nll1 = std::log(std::exp(1.0) + 59.0) - 1.0;
  const double nll3 = std::log(std::exp(3.0) + 59.0) - 3.0;
  // Weights: 0.5 on the 121 cost-map rows, 1 on the 6 action rows (A and G),
  // 0.5 on the 4 coordinate rows, 0 on Pad rows.
  const double hand_slow = (121 * 0.5 * nll1 + 4 * 0.5 * nll3 + 6 * 1.0 * nll3) / (60.5 + 2.0 + 6.0);
  double z = 0.0;
  for (double v : fast) z += std::exp(v);
  const double hand_fast = std::log(z) - 1.0;
  const double hand_total = hand_fast + 0.5 * hand_slow;

  std::vector<TrainingSample> batch{s};
  std::vector<ActionLogits> fl{fast};
  std::vector<std::vector<double>> sl{slow};
  const double impl = total_loss(fast_loss(fl, batch), slow_loss(sl, batch));
  const double err = std::abs(impl - hand_total);

  // Masked-logit independence on real samples with model logits.
  std::vector<TrainingSample> pool;
  for (int e = 0; e < 10; ++e) {
    GridMap map = gen_random(12, 12, 0.15, hash_seed({0xA5, static_cast<std::uint64_t>(e)}));
    try {
      ProblemInstance inst = generate_instance(map, 1 + e % 5, e);
      auto v = build_training_samples(run_expert_episode(inst, e));
      pool.insert(pool.end(), v.begin(), v.end());
    } catch (const Error&) {
    }
  }
  ModelConfig cfg = ModelConfig::toy();
  ModelParams p = ModelParams::init(cfg, 3);
  Rng rng(hash_seed({0xA5}));
  int changed = 0, perturbed = 0;
  const int n_samples = std::min<int>(50, static_cast<int>(pool.size()));
  for (int i = 0; i < n_samples; ++i) {
    std::vector<TrainingSample> one{pool[i]};
    std::vector<std::vector<double>> logits{forward(p, one[0].input.tokens, one[0].input.meta).slow_logits};
    const double base = slow_loss(logits, one);
    const PositionSet mask = one[0].masked();
    for (int k = 0; k < 256; ++k) {
      if (!mask[k]) continue;
      auto copy = logits;
      for (int v = 0; v < 60; ++v) copy[0][k * 60 + v] += 50.0 * (rng.uniform() - 0.5);
      ++perturbed;
      changed += slow_loss(copy, one) != base;
    }
  }
  const bool ok = err <= 1e-12 && changed == 0 && perturbed > 0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("crafted total %.15f vs hand %.15f (|err| %.1e, limit 1e-12); %d/%d masked-row perturbations moved "
              "slow_loss",
              impl, hand_total, err, changed, perturbed)};
}

// ---------------------------------------------------------------------------
// 6. Gradient check

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::vector<TrainingSample> pool;
  for (int e = 0; e < 3; ++e) {
    GridMap map = gen_random(12, 12, 0.15, hash_seed({0xA6, static_cast<std::uint64_t>(e)}));
    ProblemInstance inst = generate_instance(map, 4, e);
    auto v = build_training_samples(run_expert_episode(inst, e));
    pool.insert(pool.end(), v.begin(), v.end());
  }
  std::vector<TrainingSample> batch{pool[0], pool[pool.size() / 2], pool.back()};
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.ffn_mult = 2;
  ModelParams p = ModelParams::init(cfg, 9);
  GradCheckResult r = grad_check(p, batch, 1e-5, 3, 24, 256);
  const double secs = seconds_since(t0);
  const bool ok = r.max_relative_error < 1e-6 && r.parameters_touched >= 200 && secs < 60.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("max relative error %.2e (limit 1e-6) over %d parameters in %d projections, %.1fs (limit 60s)",
              r.max_relative_error, r.parameters_touched, r.projections, secs)};
}

// ---------------------------------------------------------------------------
// 7. Training smoke

Outcome training_smoke() {
  std::vector<TrainingSample> data;
  for (int e = 0; data.size() < 1000; ++e) {
    GridMap map = gen_random(10, 10, 0.15, hash_seed({0xA7, static_cast<std::uint64_t>(e)}));
    try {
      ProblemInstance inst = generate_instance(map, 1 + e % 4, e);
      auto v = build_training_samples(run_expert_episode(inst, e));
      data.insert(data.end(), v.begin(), v.end());
    } catch (const Error&) {
    }
  }
  data.resize(1000);
  ModelConfig cfg = ModelConfig::toy();
  cfg.seed = 7;
  TrainOptions opt;
  opt.steps = 200;
  const double before = evaluate_loss(ModelParams::init(cfg, cfg.seed), data).total;
  TrainResult a = train(data, cfg, opt);
  TrainResult b = train(data, cfg, opt);
  const double after = evaluate_loss(a.params, data).total;
  const bool identical = a.params.values == b.params.values && encode_params(a.params) == encode_params(b.params);
  const bool ok = after < before && identical;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("total loss %.4f -> %.4f over 200 steps on %zu samples; rerun %s", before, after, data.size(),
              identical ? "bit-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 8. End-to-end smoke

ExpertData end_to_end_data() {
  std::vector<GridMap> maps{GridMap(8, 8)};
  ExpertDataConfig cfg;
  cfg.instances = 500;
  cfg.min_agents = 1;
  cfg.max_agents = 4;
  cfg.seed = 0xE2E;
  return generate_expert_data(maps, cfg);
}

ModelParams train_end_to_end(const std::vector<TrainingSample>& data, bool sre, int steps, const Options& opt,
                             double& seconds) {
  ModelConfig cfg = ModelConfig::toy();
  cfg.sre_enabled = sre;
  cfg.seed = 0xE2E;
  TrainOptions t;
  t.steps = steps;
  const auto t0 = Clock::now();
  TrainResult r = train(data, cfg, t);
  seconds = seconds_since(t0);
  write_train_log_csv((opt.out_dir / (sre ? "train_sre_on.csv" : "train_sre_off.csv")).string(), r.log);
  save_params(r.params, (opt.out_dir / (sre ? "toy_sre_on.mwld" : "toy_sre_off.mwld")).string());
  return std::move(r.params);
}

double held_out_fast_sr(const ModelParams& params) {
  GridMap map(8, 8);
  int ok = 0;
  for (int e = 0; e < 100; ++e) {
    ProblemInstance inst = generate_instance(map, 1 + e % 4, hash_seed({0xE2E, 0xF00D, static_cast<std::uint64_t>(e)}));
    ok += run_episode(inst, params, ModeConfig{}, 128).success;
  }
  return ok / 100.0;
}

// ---------------------------------------------------------------------------
// Mazes smoke suite shared by criteria 9 and 12.

SuiteConfig mazes_smoke_suite() {
  SuiteConfig c;
  c.family = Family::Maze;
  // The model is trained on open 8x8 maps; one or two agents in small mazes
  // keeps success rates away from zero so the orderings carry signal.
  c.width = 9;
  c.height = 9;
  c.maps = 8;
  c.agent_counts = {1, 2};
  c.seeds = 1;
  c.step_limit = 128;
  c.master_seed = 0x5EED;
  c.modes = {parse_mode_spec("fast")};
  return c;
}

struct ModeSr {
  std::map<std::pair<std::string, int>, std::pair<int, int>> counts;  // (mode, H) -> (successes, episodes)
  double operator()(const std::string& mode, int h) const {
    auto it = counts.find({mode, h});
    return it == counts.end() || it->second.second == 0 ? 0.0
                                                         : static_cast<double>(it->second.first) / it->second.second;
  }
};

ModeSr pooled_sr(const SuiteResult& r) {
  ModeSr out;
  for (const auto& p : r.points) {
    auto& c = out.counts[{p.mode, p.horizon}];
    c.first += p.successes;
    c.second += p.episodes;
  }
  return out;
}

Outcome mode_trends(const TrainedModels& m, const Options& opt) {
  const auto t0 = Clock::now();
  SuiteConfig cfg = mazes_smoke_suite();
  SuiteResult hz = ablation_horizon(cfg, m.with_sre, {2, 3, 4, 5});
  emit_csv(hz, (opt.out_dir / "mazes_horizon.csv").string());
  emit_plot(hz, (opt.out_dir / "mazes_horizon.svg").string());
  const ModeSr sr = pooled_sr(hz);

  cfg.modes = {parse_mode_spec("fast"), parse_mode_spec("slow:2")};
  SreAblation abl = ablation_sre(cfg, m.with_sre, m.without_sre);
  emit_csv(abl.with_sre, (opt.out_dir / "mazes_sre_on.csv").string());
  emit_csv(abl.without_sre, (opt.out_dir / "mazes_sre_off.csv").string());
  const ModeSr on = pooled_sr(abl.with_sre), off = pooled_sr(abl.without_sre);

  std::vector<std::string> inversions;
  std::string thinking;
  for (int h = 2; h <= 5; ++h) thinking += fmt("%s%.3f", h == 2 ? "" : "/", sr("thinking", h));
  for (int h = 2; h < 5; ++h)
    if (sr("thinking", h + 1) > sr("thinking", h)) inversions.push_back(fmt("thinking H%d<H%d", h, h + 1));
  if (sr("slow", 2) < sr("slow", 4)) inversions.push_back("slow H2<H4");
  for (auto [mode, h] : {std::pair<const char*, int>{"fast", 0}, {"slow", 2}})
    if (on(mode, h) < off(mode, h)) inversions.push_back(fmt("sre on<off (%s)", mode));

  std::string detail = fmt("thinking H2..5 %s; slow H2 %.3f vs H4 %.3f; sre on/off fast %.3f/%.3f slow2 %.3f/%.3f; "
                           "%.0fs; archived in %s",
                           thinking.c_str(), sr("slow", 2), sr("slow", 4), on("fast", 0), off("fast", 0),
                           on("slow", 2), off("slow", 2), seconds_since(t0), opt.out_dir.string().c_str());
  if (inversions.empty()) return {Verdict::Pass, detail};
  std::string inv;
  for (const auto& s : inversions) inv += (inv.empty() ? "" : ", ") + s;
  return {Verdict::Warn, detail + "; inverted: " + inv};
}

// ---------------------------------------------------------------------------
// 10. SRE diagnostics

Outcome sre_diagnostics(const TrainedModels& m) {
  SimilarityReport r = sre_similarity_report(m.with_sre);
  return {r.distance_correlation < 0.0 ? Verdict::Pass : Verdict::Fail,
          fmt("distance correlation %.4f (need < 0); adjacent %.4f, non-adjacent %.4f", r.distance_correlation,
              r.adjacent_similarity, r.nonadjacent_similarity)};
}

// ---------------------------------------------------------------------------
// 11. Mapgen determinism

std::string mapgen_pipeline(const std::string& doc, int& raw_obstacles) {
  RasterConfig cfg;
  cfg.tile_size = 32;
  GridMap raw = rasterize(parse_osm(doc), cfg);
  raw_obstacles = raw.size() - raw.free_count();
  GridMap clean = morph_clean(raw, cfg);
  std::string bytes;
  for (const Tile& t : tile(clean, cfg)) bytes += save_map(t.map);
  return bytes;
}

Outcome mapgen_determinism() {
  const fs::path fixture = fs::path(MAPFW_FIXTURE_DIR) / "crossroads.osm";
  std::ifstream in(fixture, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string doc = ss.str();
  if (doc.empty()) return {Verdict::Fail, "fixture " + fixture.string() + " missing"};
  // Obstacle cells of the raw raster, from tests/oracles/raster_oracle.py.
  constexpr int kOracleObstacles = 7157;
  int counts[3];
  std::string runs[3];
  for (int i = 0; i < 3; ++i) runs[i] = mapgen_pipeline(doc, counts[i]);
  const bool same = runs[0] == runs[1] && runs[1] == runs[2];
  const bool oracle = counts[0] == kOracleObstacles && counts[1] == kOracleObstacles && counts[2] == kOracleObstacles;
  return {same && oracle && !runs[0].empty() ? Verdict::Pass : Verdict::Fail,
          fmt("3 runs %s (%zu bytes of .map output); raw obstacles %d vs oracle %d",
              same ? "byte-identical" : "DIFFER", runs[0].size(), counts[0], kOracleObstacles)};
}

// ---------------------------------------------------------------------------
// 12. Bench determinism

Outcome bench_determinism(const ModelParams& params) {
  SuiteConfig cfg = mazes_smoke_suite();
  cfg.modes = {parse_mode_spec("fast"), parse_mode_spec("slow:2"), parse_mode_spec("thinking:3")};
  SuiteResult one = run_suite(cfg, params, 1);
  SuiteResult eight = run_suite(cfg, params, 8);
  const bool same = one.points == eight.points && csv_text(one) == csv_text(eight);
  return {same ? Verdict::Pass : Verdict::Fail,
          fmt("%zu episodes, %zu aggregate points; parallelism 1 vs 8 %s", one.episodes.size(), one.points.size(),
              same ? "identical" : "DIFFER")};
}

const char* kNames[13] = {"",
                          "environment oracle",
                          "expert validity",
                          "tokenizer exactness",
                          "SRE structure",
                          "loss exactness",
                          "gradient check",
                          "training smoke",
                          "end-to-end smoke",
                          "mode trends",
                          "SRE diagnostics",
                          "mapgen determinism",
                          "bench determinism"};

Options parse_args(int argc, char** argv) {
  Options o;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      o.out_dir = argv[++i];
    } else if (a == "--train-steps" && i + 1 < argc) {
      o.train_steps = std::stoi(argv[++i]);
    } else {
      const int n = std::stoi(a);
      if (n < 1 || n > 12) throw std::invalid_argument("criterion out of range: " + a);
      o.only.insert(n);
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  try {
    opt = parse_args(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bad arguments: %s\n", e.what());
    return 2;
  }
  fs::create_directories(opt.out_dir);
  auto selected = [&](int n) { return opt.only.empty() || opt.only.contains(n); };

  std::optional<TrainedModels> models;
  std::optional<ExpertData> e2e_data;
  auto ensure_models = [&]() -> TrainedModels& {
    if (!models) {
      if (!e2e_data) e2e_data = end_to_end_data();
      TrainedModels m;
      double off_secs = 0.0;
      m.with_sre = train_end_to_end(e2e_data->samples, true, opt.train_steps, opt, m.train_seconds);
      m.without_sre = train_end_to_end(e2e_data->samples, false, opt.train_steps, opt, off_secs);
      models = std::move(m);
    }
    return *models;
  };

  std::vector<std::function<Outcome()>> checks(13);
  checks[1] = environment_oracle;
  checks[2] = expert_validity;
  checks[3] = tokenizer_exactness;
  checks[4] = sre_structure;
  checks[5] = loss_exactness;
  checks[6] = gradient_check;
  checks[7] = training_smoke;
  checks[8] = [&]() -> Outcome {
    const auto t0 = Clock::now();
    e2e_data = end_to_end_data();
    TrainedModels& m = ensure_models();
    const double sr = held_out_fast_sr(m.with_sre);
    const bool ok = sr >= 0.9 && m.train_seconds <= 1800.0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("%d/%d expert episodes solved, %zu samples; toy model %d steps in %.0fs (limit 1800s); held-out "
                "Fast SR %.2f (need 0.90); %.0fs total",
                e2e_data->solved, e2e_data->attempted, e2e_data->samples.size(), opt.train_steps, m.train_seconds, sr,
                seconds_since(t0))};
  };
  checks[9] = [&] { return mode_trends(ensure_models(), opt); };
  checks[10] = [&] { return sre_diagnostics(ensure_models()); };
  checks[11] = mapgen_determinism;
  checks[12] = [&] { return bench_determinism(ensure_models().with_sre); };

  int failed = 0, warned = 0, ran = 0;
  std::ostringstream summary;
  for (int n = 1; n <= 12; ++n) {
    if (!selected(n)) continue;
    ++ran;
    Outcome o;
    try {
      o = checks[n]();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Warn ? "WARN" : "FAIL";
    failed += o.verdict == Verdict::Fail;
    warned += o.verdict == Verdict::Warn;
    const std::string line = fmt("[%s] %2d %-20s ", tag, n, kNames[n]) + o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary << line << '\n';
  }
  std::printf("%d run, %d passed, %d warned, %d failed\n", ran, ran - failed - warned, warned, failed);
  std::ofstream(opt.out_dir / "summary.txt") << summary.str();
  return failed == 0 ? 0 : 1;
}
