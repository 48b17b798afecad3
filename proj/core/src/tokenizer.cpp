#include "mapfw/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mapfw/error.hpp"
#include "mapfw/solvers.hpp"

namespace mapfw {

TokenId quantize_coord(int v) {
  v = std::clamp(v, vocab::kCoordMin, vocab::kCoordMax);
  return static_cast<TokenId>(vocab::kCoordBase + v - vocab::kCoordMin);
}

void ActionHistory::push(int agent, Action a) {
  auto& h = recent_[agent];
  if (static_cast<int>(h.size()) == layout::kHistoryLen) h.erase(h.begin());
  h.push_back(a);
}

void ActionHistory::push_all(std::span<const Action> joint) {
  for (std::size_t i = 0; i < joint.size(); ++i) push(static_cast<int>(i), joint[i]);
}

std::vector<CostField> compute_cost_fields(const ProblemInstance& instance) {
  std::vector<CostField> fields;
  fields.reserve(instance.agents.size());
  for (const auto& task : instance.agents) fields.push_back(bfs_cost_to_goal(instance.map, task.goal));
  return fields;
}

namespace {

int chebyshev(Coord d) { return std::max(std::abs(d.row), std::abs(d.col)); }

Coord clamp_coord(Coord c) {
  return {std::clamp(c.row, vocab::kCoordMin, vocab::kCoordMax),
          std::clamp(c.col, vocab::kCoordMin, vocab::kCoordMax)};
}

}  // namespace

ObservationBundle build_observation(const State& state, int ego, const ProblemInstance& instance,
                                    std::span<const CostField> costfields,
                                    const ActionHistory& history,
                                    const NeighborActions* est_override) {
  const int n = static_cast<int>(state.positions.size());
  if (ego < 0 || ego >= n) throw Error(ErrorCode::EgoNotInState, "ego " + std::to_string(ego));
  const GridMap& map = instance.map;
  const Coord here = state.positions[ego];
  const CostField& own = costfields[ego];

  ObservationBundle obs;
  obs.ego = ego;
  obs.step = state.step;
  obs.tokens.fill(vocab::kPad);
  obs.slot_agents.fill(kEmptySlot);

  const int here_dist = own.at(here);
  for (int k = 0; k < layout::kCostMapTokens; ++k) {
    const Coord cell = here + layout::costmap_offset(k);
    if (!map.is_free(cell)) {
      obs.tokens[k] = vocab::kObstacle;
    } else if (!own.reachable(cell) || here_dist == kUnreachable) {
      obs.tokens[k] = vocab::kUnreachable;
    } else {
      obs.tokens[k] = vocab::cost_delta(own.at(cell) - here_dist);
    }
  }

  std::vector<std::pair<int, int>> visible;  // (chebyshev distance, agent id)
  for (int j = 0; j < n; ++j) {
    if (j == ego) continue;
    const int d = chebyshev(state.positions[j] - here);
    if (d <= layout::kFovRadius) visible.emplace_back(d, j);
  }
  std::sort(visible.begin(), visible.end());
  if (static_cast<int>(visible.size()) > layout::kAgentSlots - 1) visible.resize(layout::kAgentSlots - 1);

  auto fill_slot = [&](int slot, int agent) {
    const Coord rel = state.positions[agent] - here;
    const Coord goal = clamp_coord(instance.agents[agent].goal - here);
    obs.slot_agents[slot] = agent;
    obs.meta.slots[slot] = {true, rel, goal};
    obs.tokens[layout::slot_pos(slot, layout::kRelRow)] = quantize_coord(rel.row);
    obs.tokens[layout::slot_pos(slot, layout::kRelCol)] = quantize_coord(rel.col);
    obs.tokens[layout::slot_pos(slot, layout::kGoalRow)] = quantize_coord(goal.row);
    obs.tokens[layout::slot_pos(slot, layout::kGoalCol)] = quantize_coord(goal.col);
    const auto& past = history.of(agent);
    const int pad = layout::kHistoryLen - static_cast<int>(past.size());
    for (int h = 0; h < static_cast<int>(past.size()); ++h) {
      obs.tokens[layout::slot_pos(slot, layout::kHistory + pad + h)] = vocab::action(past[h]);
    }
    Action est;
    if (est_override != nullptr && est_override->contains(agent)) {
      est = est_override->at(agent);
    } else {
      est = greedy_action(costfields[agent], state.positions[agent], map);
    }
    obs.tokens[layout::slot_pos(slot, layout::kEst)] = vocab::action(est);
  };

  fill_slot(0, ego);
  for (std::size_t s = 0; s < visible.size(); ++s) fill_slot(static_cast<int>(s) + 1, visible[s].second);
  return obs;
}

SreMeta sre_meta_from_tokens(const TokenSeq& tokens) {
  SreMeta meta;
  for (int s = 0; s < layout::kAgentSlots; ++s) {
    const TokenId r = tokens[layout::slot_pos(s, layout::kRelRow)];
    const TokenId c = tokens[layout::slot_pos(s, layout::kRelCol)];
    const TokenId gr = tokens[layout::slot_pos(s, layout::kGoalRow)];
    const TokenId gc = tokens[layout::slot_pos(s, layout::kGoalCol)];
    if (!vocab::is_coord(r) || !vocab::is_coord(c) || !vocab::is_coord(gr) || !vocab::is_coord(gc)) continue;
    meta.slots[s] = {true,
                     {vocab::decode_coord(r), vocab::decode_coord(c)},
                     {vocab::decode_coord(gr), vocab::decode_coord(gc)}};
  }
  return meta;
}

NeighborActions extract_predicted_neighbor_actions(const TokenSeq& predicted,
                                                   std::span<const int> slot_agents) {
  NeighborActions out;
  for (int s = 1; s < static_cast<int>(slot_agents.size()) && s < layout::kAgentSlots; ++s) {
    if (slot_agents[s] == kEmptySlot) continue;
    const TokenId t = predicted[layout::slot_pos(s, layout::kEst)];
    if (vocab::is_action(t)) out[slot_agents[s]] = vocab::decode_action(t);
  }
  return out;
}

PositionSet TrainingSample::masked() const {
  PositionSet m;
  for (int k = 0; k < layout::kSeqLen; ++k) m[k] = target_tokens[k] == vocab::kPad;
  return m;
}

void fill_weight_sets(TrainingSample& sample) {
  sample.real_action.reset();
  sample.estimated_action.reset();
  const TokenSeq& t = sample.target_tokens;
  for (int s = 0; s < layout::kAgentSlots; ++s) {
    bool occupied = false;
    for (int o = 0; o < layout::kSegmentLen; ++o) occupied |= t[layout::slot_pos(s, o)] != vocab::kPad;
    if (!occupied) continue;
    for (int h = 0; h < layout::kHistoryLen; ++h) {
      const int k = layout::slot_pos(s, layout::kHistory + h);
      if (t[k] != vocab::kPad) sample.real_action.set(k);
    }
    const int est = layout::slot_pos(s, layout::kEst);
    if (t[est] != vocab::kPad) sample.estimated_action.set(est);
  }
}

std::vector<TrainingSample> build_training_samples(const Trajectory& traj) {
  std::vector<TrainingSample> out;
  const int n = traj.instance.num_agents();
  out.reserve(static_cast<std::size_t>(n) * traj.makespan());
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < traj.makespan(); ++t) {
      TrainingSample s;
      s.input = traj.observations[t][i];
      s.target_tokens = traj.observations[t + 1][i].tokens;
      s.target_action = traj.actions[t][i];
      fill_weight_sets(s);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

constexpr char kDatasetMagic[4] = {'M', 'W', 'D', 'S'};
constexpr std::int8_t kSidecarPad = -128;

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff));
}

template <class T>
T get_le(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + b])) << (8 * b);
  return static_cast<T>(v);
}

void put_bits(std::string& out, const PositionSet& bits) {
  for (int byte = 0; byte < layout::kSeqLen / 8; ++byte) {
    unsigned v = 0;
    for (int b = 0; b < 8; ++b) v |= bits[byte * 8 + b] ? (1u << b) : 0u;
    out.push_back(static_cast<char>(v));
  }
}

PositionSet get_bits(std::string_view bytes, std::size_t at) {
  PositionSet bits;
  for (int byte = 0; byte < layout::kSeqLen / 8; ++byte) {
    const auto v = static_cast<unsigned char>(bytes[at + byte]);
    for (int b = 0; b < 8; ++b) bits[byte * 8 + b] = (v >> b) & 1u;
  }
  return bits;
}

}  // namespace

std::string encode_dataset(std::span<const TrainingSample> samples) {
  std::string out(kDatasetMagic, 4);
  put_le<std::uint32_t>(out, kDatasetVersion);
  put_le<std::uint32_t>(out, vocab::kSize);
  put_le<std::uint64_t>(out, samples.size());
  out.reserve(out.size() + samples.size() * kDatasetRecordBytes);
  for (const TrainingSample& s : samples) {
    out.append(reinterpret_cast<const char*>(s.input.tokens.data()), layout::kSeqLen);
    out.append(reinterpret_cast<const char*>(s.target_tokens.data()), layout::kSeqLen);
    out.push_back(static_cast<char>(s.target_action));
    for (const SlotGeometry& g : s.input.meta.slots) {
      out.push_back(static_cast<char>(g.occupied ? static_cast<std::int8_t>(g.rel_pos.row) : kSidecarPad));
      out.push_back(static_cast<char>(g.occupied ? static_cast<std::int8_t>(g.rel_pos.col) : kSidecarPad));
    }
    out.append(32 - 2 * layout::kAgentSlots, '\0');
    put_bits(out, s.real_action);
    put_bits(out, s.estimated_action);
  }
  return out;
}

Dataset decode_dataset(std::string_view bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 4 + 8;
  if (bytes.size() < kHeader || bytes.substr(0, 4) != std::string_view(kDatasetMagic, 4)) {
    throw Error(ErrorCode::BadMagic, "not an MWDS dataset");
  }
  if (get_le<std::uint32_t>(bytes, 4) != kDatasetVersion) {
    throw Error(ErrorCode::VersionMismatch, "unsupported dataset version");
  }
  if (get_le<std::uint32_t>(bytes, 8) != vocab::kSize) {
    throw Error(ErrorCode::ShapeMismatch, "dataset vocabulary size differs");
  }
  const auto count = get_le<std::uint64_t>(bytes, 12);
  if (bytes.size() != kHeader + count * kDatasetRecordBytes) {
    throw Error(ErrorCode::BadDataset, "dataset length does not match sample count");
  }
  Dataset ds;
  ds.samples.resize(count);
  std::size_t at = kHeader;
  for (TrainingSample& s : ds.samples) {
    std::copy_n(bytes.data() + at, layout::kSeqLen, reinterpret_cast<char*>(s.input.tokens.data()));
    at += layout::kSeqLen;
    std::copy_n(bytes.data() + at, layout::kSeqLen, reinterpret_cast<char*>(s.target_tokens.data()));
    at += layout::kSeqLen;
    const auto action = static_cast<unsigned char>(bytes[at++]);
    if (action >= kNumActions) throw Error(ErrorCode::BadDataset, "target action out of range");
    s.target_action = static_cast<Action>(action);
    const SreMeta from_tokens = sre_meta_from_tokens(s.input.tokens);
    s.input.slot_agents.fill(kEmptySlot);
    for (int slot = 0; slot < layout::kAgentSlots; ++slot) {
      const auto r = static_cast<std::int8_t>(bytes[at + 2 * slot]);
      const auto c = static_cast<std::int8_t>(bytes[at + 2 * slot + 1]);
      if (r == kSidecarPad) continue;
      s.input.meta.slots[slot] = {true, {r, c}, from_tokens.slots[slot].rel_goal};
    }
    at += 32;
    s.real_action = get_bits(bytes, at);
    at += layout::kSeqLen / 8;
    s.estimated_action = get_bits(bytes, at);
    at += layout::kSeqLen / 8;
  }
  return ds;
}

void write_dataset(const std::string& path, std::span<const TrainingSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  const std::string bytes = encode_dataset(samples);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_dataset(ss.str());
}

std::string render_tokens(const TokenSeq& tokens) {
  std::string out;
  for (int k = 0; k < layout::kSeqLen; ++k) {
    const TokenId t = tokens[k];
    if (vocab::is_cost_delta(t)) {
      out += std::to_string(vocab::decode_cost_delta(t));
    } else if (t == vocab::kObstacle) {
      out += "#";
    } else if (t == vocab::kUnreachable) {
      out += "x";
    } else if (vocab::is_coord(t)) {
      out += "c" + std::to_string(vocab::decode_coord(t));
    } else if (vocab::is_action(t)) {
      out += action_char(vocab::decode_action(t));
    } else {
      out += "_";
    }
    out += k + 1 == layout::kSeqLen ? '\n' : ' ';
  }
  return out;
}

}  // namespace mapfw
