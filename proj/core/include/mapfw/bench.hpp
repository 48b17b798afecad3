#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mapfw/grid.hpp"
#include "mapfw/mapgen.hpp"
#include "mapfw/neural.hpp"
#include "mapfw/policy.hpp"

namespace mapfw {

enum class Family { Random, Maze, Warehouse, Empty, Osm };

const char* family_name(Family f);
Family parse_family(std::string_view name);

// One evaluation suite over a single map family. Desk-scale defaults.
struct SuiteConfig {
  Family family = Family::Random;
  int width = 17;
  int height = 17;
  int maps = 16;
  std::vector<int> agent_counts{4, 8, 16};
  int seeds = 1;
  int step_limit = 128;
  std::vector<ModeConfig> modes{ModeConfig{}};
  std::uint64_t master_seed = 0;
  double density = 0.2;          // Random family
  WarehouseParams warehouse{};   // Warehouse family
  std::string map_dir;           // Osm family: directory of .map tiles

  // Throws BadConfig: agent counts positive ascending, step limit 128 or 256.
  void validate() const;
};

// TOML-style key/value text, e.g. `agents = [4, 8, 16]`, `modes = ["fast", "slow:2"]`.
SuiteConfig parse_suite_config(std::string_view text);
SuiteConfig load_suite_config(const std::string& path);

// "fast", "slow:3", "thinking:2"; the H suffix defaults to 2.
ModeConfig parse_mode_spec(std::string_view spec);
std::string mode_spec(const ModeConfig& mode);

struct EpisodeRecord {
  std::string family;
  int map = 0;
  int agents = 0;
  int seed = 0;
  std::string mode;
  int horizon = 0;  // 0 for Fast
  bool success = false;
  int steps = 0;
};

struct SuitePoint {
  std::string family;
  int agents = 0;
  std::string mode;
  int horizon = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;  // over successful episodes, 0 when none
  int episodes = 0;
  int successes = 0;

  bool operator==(const SuitePoint&) const = default;
};

struct Provenance {
  std::uint64_t master_seed = 0;
  std::string commit;
  std::string params_hash;  // fnv1a64 of the encoded params, hex
};

struct SuiteResult {
  std::vector<EpisodeRecord> episodes;
  std::vector<SuitePoint> points;  // sorted by (family, mode, H, agents)
  Provenance provenance;
};

// Order-independent aggregation of episode records.
std::vector<SuitePoint> aggregate(const std::vector<EpisodeRecord>& episodes);

// Build commit recorded in provenance; set at configure time.
std::string build_commit();
std::string params_hash(const ModelParams& params);

// Throws ParamsIncompatible when the params cannot drive the tokenizer layout.
void check_params_compatible(const ModelParams& params);

// The maps a suite runs on, generated deterministically from the master seed.
std::vector<GridMap> suite_maps(const SuiteConfig& config);

// Seeds are derived from the master seed by hashing
// (family, map index, agents, seed index) for the instance and additionally
// (mode, H) for the episode, so results do not depend on scheduling.
std::uint64_t instance_seed(const SuiteConfig& config, int map, int agents, int seed_idx);
std::uint64_t episode_seed(const SuiteConfig& config, int map, int agents, int seed_idx,
                           const ModeConfig& mode);

// parallelism <= 0 selects the number of hardware threads.
SuiteResult run_suite(const SuiteConfig& config, const ModelParams& params, int parallelism = 1);

// One suite per (mode, H) for Slow and Thinking; Fast entries are dropped.
SuiteResult ablation_horizon(const SuiteConfig& config, const ModelParams& params,
                             const std::vector<int>& horizons = {2, 3, 4, 5}, int parallelism = 1);

struct SreDelta {
  std::string family;
  std::string mode;
  int horizon = 0;
  double sr_with = 0.0;
  double sr_without = 0.0;
  double delta = 0.0;  // with - without, averaged over agent counts
};

struct SreAblation {
  SuiteResult with_sre;
  SuiteResult without_sre;
  std::vector<SreDelta> deltas;
};

// Throws ParamsIncompatible unless the two params differ at most in the SRE flag.
SreAblation ablation_sre(const SuiteConfig& config, const ModelParams& with_sre,
                         const ModelParams& without_sre, int parallelism = 1);

// CSV schema: family,map,agents,seed,mode,H,success,steps. Throws IoFailure.
void emit_csv(const SuiteResult& result, const std::string& path);
std::string csv_text(const SuiteResult& result);
std::vector<EpisodeRecord> parse_csv(std::string_view text);
std::vector<EpisodeRecord> read_csv(const std::string& path);

// Success rate vs agent count, one curve per (family, mode, H). Throws IoFailure.
void emit_plot(const SuiteResult& result, const std::string& path);
std::string plot_svg(const SuiteResult& result);

}  // namespace mapfw
