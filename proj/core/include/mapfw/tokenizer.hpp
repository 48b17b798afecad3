#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapfw/grid.hpp"

namespace mapfw {

using TokenId = std::uint8_t;

// Token vocabulary. Ids are dense and stable; changing them invalidates
// datasets and params files.
namespace vocab {

inline constexpr int kCostDeltaMin = -10;
inline constexpr int kCostDeltaMax = 10;
inline constexpr int kCoordMin = -15;
inline constexpr int kCoordMax = 15;

inline constexpr TokenId kCostDeltaBase = 0;                   // 21 ids
inline constexpr TokenId kObstacle = 21;
inline constexpr TokenId kUnreachable = 22;
inline constexpr TokenId kCoordBase = 23;                      // 31 ids
inline constexpr TokenId kActionBase = 54;                     // 5 ids
inline constexpr TokenId kPad = 59;
inline constexpr int kSize = 60;

constexpr TokenId cost_delta(int delta) {
  delta = delta < kCostDeltaMin ? kCostDeltaMin : (delta > kCostDeltaMax ? kCostDeltaMax : delta);
  return static_cast<TokenId>(kCostDeltaBase + delta - kCostDeltaMin);
}
constexpr TokenId action(Action a) { return static_cast<TokenId>(kActionBase + static_cast<int>(a)); }

constexpr bool is_cost_delta(TokenId t) { return t < kObstacle; }
constexpr bool is_coord(TokenId t) { return t >= kCoordBase && t < kActionBase; }
constexpr bool is_action(TokenId t) { return t >= kActionBase && t < kPad; }

constexpr int decode_cost_delta(TokenId t) { return static_cast<int>(t) - kCostDeltaBase + kCostDeltaMin; }
constexpr int decode_coord(TokenId t) { return static_cast<int>(t) - kCoordBase + kCoordMin; }
constexpr Action decode_action(TokenId t) { return static_cast<Action>(t - kActionBase); }

}  // namespace vocab

TokenId quantize_coord(int v);

// Observation layout (0-based positions).
namespace layout {

inline constexpr int kSeqLen = 256;
inline constexpr int kFovRadius = 5;
inline constexpr int kFovSide = 2 * kFovRadius + 1;
inline constexpr int kCostMapTokens = kFovSide * kFovSide;     // 121
inline constexpr int kAgentSlots = 13;
inline constexpr int kSegmentLen = 10;
inline constexpr int kAgentBase = kCostMapTokens;              // 121
inline constexpr int kTailBase = kAgentBase + kAgentSlots * kSegmentLen;  // 251
inline constexpr int kHistoryLen = 5;

// Offsets inside an agent segment.
inline constexpr int kRelRow = 0;
inline constexpr int kRelCol = 1;
inline constexpr int kGoalRow = 2;
inline constexpr int kGoalCol = 3;
inline constexpr int kHistory = 4;
inline constexpr int kEst = 9;

constexpr int slot_pos(int slot, int offset) { return kAgentBase + slot * kSegmentLen + offset; }

// Cost-map position k covers the cell at (row, col) offset (k / 11 - 5, k % 11 - 5).
constexpr Coord costmap_offset(int k) { return {k / kFovSide - kFovRadius, k % kFovSide - kFovRadius}; }

}  // namespace layout

static_assert(layout::kTailBase + 5 == layout::kSeqLen);

using TokenSeq = std::array<TokenId, layout::kSeqLen>;

inline constexpr int kEmptySlot = -1;

// Raw per-slot geometry consumed by the spatial relational encoding.
struct SlotGeometry {
  bool occupied = false;
  Coord rel_pos;   // agent position relative to ego
  Coord rel_goal;  // agent goal relative to ego, clamped to the coord range
  Coord displacement() const { return rel_goal - rel_pos; }
  friend bool operator==(const SlotGeometry&, const SlotGeometry&) = default;
};

struct SreMeta {
  std::array<SlotGeometry, layout::kAgentSlots> slots{};
  friend bool operator==(const SreMeta&, const SreMeta&) = default;
};

struct ObservationBundle {
  TokenSeq tokens{};
  SreMeta meta;
  std::array<int, layout::kAgentSlots> slot_agents{};  // global agent id or kEmptySlot
  int ego = 0;
  int step = 0;
  friend bool operator==(const ObservationBundle&, const ObservationBundle&) = default;
};

// Last resolved actions per agent, oldest first.
class ActionHistory {
 public:
  explicit ActionHistory(int n_agents = 0) : recent_(n_agents) {}
  void push(int agent, Action a);
  void push_all(std::span<const Action> joint);
  const std::vector<Action>& of(int agent) const { return recent_[agent]; }
  int num_agents() const { return static_cast<int>(recent_.size()); }

 private:
  std::vector<std::vector<Action>> recent_;
};

using NeighborActions = std::map<int, Action>;

std::vector<CostField> compute_cost_fields(const ProblemInstance& instance);

ObservationBundle build_observation(const State& state, int ego, const ProblemInstance& instance,
                                    std::span<const CostField> costfields,
                                    const ActionHistory& history,
                                    const NeighborActions* est_override = nullptr);

// Rebuilds the SRE geometry from position/goal tokens. Slots whose tokens do
// not decode to coordinates are treated as empty.
SreMeta sre_meta_from_tokens(const TokenSeq& tokens);

NeighborActions extract_predicted_neighbor_actions(const TokenSeq& predicted,
                                                   std::span<const int> slot_agents);

using PositionSet = std::bitset<layout::kSeqLen>;

struct TrainingSample {
  ObservationBundle input;
  TokenSeq target_tokens{};
  Action target_action = Action::Wait;
  PositionSet real_action;       // A
  PositionSet estimated_action;  // G

  PositionSet masked() const;    // M: Pad positions of the target
};

struct Trajectory;
std::vector<TrainingSample> build_training_samples(const Trajectory& traj);

// Weight sets derived from a target observation.
void fill_weight_sets(TrainingSample& sample);

// MWDS dataset file.
struct Dataset {
  std::vector<TrainingSample> samples;
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetRecordBytes = 256 + 256 + 1 + 32 + 64;

void write_dataset(const std::string& path, std::span<const TrainingSample> samples);
std::string encode_dataset(std::span<const TrainingSample> samples);
Dataset read_dataset(const std::string& path);
Dataset decode_dataset(std::string_view bytes);

std::string render_tokens(const TokenSeq& tokens);

}  // namespace mapfw
