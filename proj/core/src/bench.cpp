#include "mapfw/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"
#include "parallel.hpp"

#ifndef MAPFW_COMMIT
#define MAPFW_COMMIT "unknown"
#endif

namespace mapfw {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string_view s) {
  std::string t = trim(s);
  if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) {
    return t.substr(1, t.size() - 2);
  }
  return t;
}

std::vector<std::string> parse_list(std::string_view key, std::string_view value) {
  std::string t = trim(value);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
    throw Error(ErrorCode::BadConfig, std::string(key) + ": expected a [..] list");
  }
  std::vector<std::string> out;
  std::stringstream ss(t.substr(1, t.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string v = unquote(item);
    if (!v.empty()) out.push_back(v);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  const std::string t = unquote(value);
  T out{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(ErrorCode::BadConfig, std::string(key) + ": bad number '" + t + "'");
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int effective_horizon(const ModeConfig& m) { return m.mode == Mode::Fast ? 0 : m.horizon; }

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

struct Job {
  int map;
  int agents;
  int seed;
  int mode;
};

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::Random: return "random";
    case Family::Maze: return "maze";
    case Family::Warehouse: return "warehouse";
    case Family::Empty: return "empty";
    case Family::Osm: return "osm";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::Random, Family::Maze, Family::Warehouse, Family::Empty, Family::Osm}) {
    if (name == family_name(f)) return f;
  }
  throw Error(ErrorCode::BadConfig, "unknown map family '" + std::string(name) + "'");
}

void SuiteConfig::validate() const {
  if (agent_counts.empty()) throw Error(ErrorCode::BadConfig, "agent counts must not be empty");
  for (std::size_t i = 0; i < agent_counts.size(); ++i) {
    if (agent_counts[i] <= 0 || (i > 0 && agent_counts[i] <= agent_counts[i - 1])) {
      throw Error(ErrorCode::BadConfig, "agent counts must be positive and strictly ascending");
    }
  }
  if (step_limit != 128 && step_limit != 256) {
    throw Error(ErrorCode::BadConfig, "step limit must be 128 or 256");
  }
  if (maps <= 0 || seeds <= 0) throw Error(ErrorCode::BadConfig, "maps and seeds must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::BadConfig, "map size must be positive");
  if (modes.empty()) throw Error(ErrorCode::BadConfig, "at least one mode is required");
  for (const auto& m : modes) m.validate();
  if (family == Family::Osm && map_dir.empty()) {
    throw Error(ErrorCode::BadConfig, "osm family requires map_dir");
  }
}

ModeConfig parse_mode_spec(std::string_view spec) {
  ModeConfig m;
  const auto colon = spec.find(':');
  m.mode = parse_mode(trim(spec.substr(0, colon)));
  if (colon != std::string_view::npos) m.horizon = parse_number<int>("mode", spec.substr(colon + 1));
  return m;
}

std::string mode_spec(const ModeConfig& mode) {
  if (mode.mode == Mode::Fast) return "fast";
  return std::string(mode_name(mode.mode)) + ":" + std::to_string(mode.horizon);
}

SuiteConfig parse_suite_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  SuiteConfig c;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw Error(ErrorCode::BadConfig, "sections are not supported: [" + key + "]");
    const std::string v = node.data();
    if (key == "family") {
      c.family = parse_family(unquote(v));
    } else if (key == "width") {
      c.width = parse_number<int>(key, v);
    } else if (key == "height") {
      c.height = parse_number<int>(key, v);
    } else if (key == "size") {
      c.width = c.height = parse_number<int>(key, v);
    } else if (key == "maps") {
      c.maps = parse_number<int>(key, v);
    } else if (key == "agents") {
      c.agent_counts.clear();
      for (const auto& s : parse_list(key, v)) c.agent_counts.push_back(parse_number<int>(key, s));
    } else if (key == "seeds") {
      c.seeds = parse_number<int>(key, v);
    } else if (key == "step_limit") {
      c.step_limit = parse_number<int>(key, v);
    } else if (key == "modes") {
      c.modes.clear();
      for (const auto& s : parse_list(key, v)) c.modes.push_back(parse_mode_spec(s));
    } else if (key == "master_seed") {
      c.master_seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "density") {
      c.density = parse_number<double>(key, v);
    } else if (key == "map_dir") {
      c.map_dir = unquote(v);
    } else if (key == "warehouse_rows") {
      c.warehouse.rows = parse_number<int>(key, v);
    } else if (key == "warehouse_cols") {
      c.warehouse.cols = parse_number<int>(key, v);
    } else if (key == "warehouse_shelf_len") {
      c.warehouse.shelf_len = parse_number<int>(key, v);
    } else if (key == "warehouse_aisle_w") {
      c.warehouse.aisle_w = parse_number<int>(key, v);
    } else {
      throw Error(ErrorCode::BadConfig, "unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

SuiteConfig load_suite_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_suite_config(ss.str());
}

std::vector<SuitePoint> aggregate(const std::vector<EpisodeRecord>& episodes) {
  using Key = std::tuple<std::string, std::string, int, int>;
  struct Acc {
    int n = 0, ok = 0;
    long long steps = 0;
  };
  std::map<Key, Acc> acc;
  for (const auto& e : episodes) {
    Acc& a = acc[{e.family, e.mode, e.horizon, e.agents}];
    ++a.n;
    if (e.success) {
      ++a.ok;
      a.steps += e.steps;
    }
  }
  std::vector<SuitePoint> out;
  for (const auto& [k, a] : acc) {
    SuitePoint p;
    std::tie(p.family, p.mode, p.horizon, p.agents) = k;
    p.episodes = a.n;
    p.successes = a.ok;
    p.success_rate = static_cast<double>(a.ok) / a.n;
    p.mean_steps = a.ok > 0 ? static_cast<double>(a.steps) / a.ok : 0.0;
    out.push_back(std::move(p));
  }
  return out;
}

std::string build_commit() { return MAPFW_COMMIT; }

std::string params_hash(const ModelParams& params) { return hex64(fnv1a64(encode_params(params))); }

void check_params_compatible(const ModelParams& params) {
  const ModelConfig& c = params.config;
  if (c.vocab_size != vocab::kSize || c.seq_len != layout::kSeqLen) {
    throw Error(ErrorCode::ParamsIncompatible, "params vocabulary or sequence length do not match the tokenizer");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ParamsIncompatible, e.what());
  }
  if (params.values.size() != param_count(c)) {
    throw Error(ErrorCode::ParamsIncompatible, "parameter count does not match the model config");
  }
}

std::vector<GridMap> suite_maps(const SuiteConfig& config) {
  std::vector<GridMap> maps;
  const std::uint64_t fam = fnv1a64(family_name(config.family));
  if (config.family == Family::Osm) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(config.map_dir, ec)) {
      if (entry.path().extension() == ".map") files.push_back(entry.path());
    }
    if (ec) throw Error(ErrorCode::IoFailure, "cannot list '" + config.map_dir + "'");
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::BadConfig, "no .map files in '" + config.map_dir + "'");
    for (int i = 0; i < config.maps && i < static_cast<int>(files.size()); ++i) {
      maps.push_back(load_map_file(files[i].string()));
    }
    return maps;
  }
  for (int i = 0; i < config.maps; ++i) {
    const std::uint64_t s = hash_seed({config.master_seed, fam, static_cast<std::uint64_t>(i)});
    switch (config.family) {
      case Family::Random: maps.push_back(gen_random(config.width, config.height, config.density, s)); break;
      case Family::Maze: maps.push_back(gen_maze(config.width, config.height, s)); break;
      case Family::Warehouse: maps.push_back(gen_warehouse(config.warehouse)); break;
      case Family::Empty: maps.emplace_back(config.width, config.height); break;
      case Family::Osm: break;
    }
  }
  return maps;
}

std::uint64_t instance_seed(const SuiteConfig& config, int map, int agents, int seed_idx) {
  return hash_seed({config.master_seed, fnv1a64(family_name(config.family)), static_cast<std::uint64_t>(map),
                    static_cast<std::uint64_t>(agents), static_cast<std::uint64_t>(seed_idx)});
}

std::uint64_t episode_seed(const SuiteConfig& config, int map, int agents, int seed_idx, const ModeConfig& mode) {
  return hash_seed({instance_seed(config, map, agents, seed_idx), static_cast<std::uint64_t>(mode.mode),
                    static_cast<std::uint64_t>(effective_horizon(mode))});
}

SuiteResult run_suite(const SuiteConfig& config, const ModelParams& params, int parallelism) {
  config.validate();
  check_params_compatible(params);
  const std::vector<GridMap> maps = suite_maps(config);

  // Instances are shared across modes so that modes compare on equal footing.
  std::vector<Job> jobs;
  for (int m = 0; m < static_cast<int>(maps.size()); ++m)
    for (int a : config.agent_counts)
      for (int s = 0; s < config.seeds; ++s)
        for (int k = 0; k < static_cast<int>(config.modes.size()); ++k) jobs.push_back({m, a, s, k});

  SuiteResult result;
  result.episodes.resize(jobs.size());
  detail::parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    const Job& j = jobs[i];
    const ModeConfig& mode = config.modes[j.mode];
    const ProblemInstance inst = generate_instance(maps[j.map], j.agents, instance_seed(config, j.map, j.agents, j.seed));
    const EpisodeResult r =
        run_episode(inst, params, mode, config.step_limit, episode_seed(config, j.map, j.agents, j.seed, mode));
    result.episodes[i] = {family_name(config.family), j.map, j.agents, j.seed, mode_name(mode.mode),
                          effective_horizon(mode), r.success, r.steps_used};
  });
  result.points = aggregate(result.episodes);
  result.provenance = {config.master_seed, build_commit(), params_hash(params)};
  return result;
}

SuiteResult ablation_horizon(const SuiteConfig& config, const ModelParams& params, const std::vector<int>& horizons,
                             int parallelism) {
  std::vector<Mode> modes;
  for (const auto& m : config.modes)
    if (m.mode != Mode::Fast && std::find(modes.begin(), modes.end(), m.mode) == modes.end()) modes.push_back(m.mode);
  if (modes.empty()) modes = {Mode::Slow, Mode::Thinking};
  SuiteConfig sweep = config;
  sweep.modes.clear();
  for (Mode m : modes)
    for (int h : horizons) sweep.modes.push_back(ModeConfig{m, h});
  return run_suite(sweep, params, parallelism);
}

SreAblation ablation_sre(const SuiteConfig& config, const ModelParams& with_sre, const ModelParams& without_sre,
                         int parallelism) {
  ModelConfig a = with_sre.config, b = without_sre.config;
  a.sre_enabled = b.sre_enabled = true;
  if (!a.same_architecture(b)) {
    throw Error(ErrorCode::ParamsIncompatible, "SRE ablation needs params that differ only in the SRE flag");
  }
  SreAblation out;
  out.with_sre = run_suite(config, with_sre, parallelism);
  out.without_sre = run_suite(config, without_sre, parallelism);

  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::pair<double, double>> sums;
  std::map<Key, int> counts;
  for (const auto& p : out.with_sre.points) {
    sums[{p.family, p.mode, p.horizon}].first += p.success_rate;
    ++counts[{p.family, p.mode, p.horizon}];
  }
  for (const auto& p : out.without_sre.points) sums[{p.family, p.mode, p.horizon}].second += p.success_rate;
  for (const auto& [k, s] : sums) {
    SreDelta d;
    std::tie(d.family, d.mode, d.horizon) = k;
    const int n = counts[k];
    d.sr_with = s.first / n;
    d.sr_without = s.second / n;
    d.delta = d.sr_with - d.sr_without;
    out.deltas.push_back(std::move(d));
  }
  return out;
}

std::string csv_text(const SuiteResult& result) {
  std::ostringstream out;
  out << "family,map,agents,seed,mode,H,success,steps\n";
  for (const auto& e : result.episodes) {
    out << e.family << ',' << e.map << ',' << e.agents << ',' << e.seed << ',' << e.mode << ',' << e.horizon << ','
        << (e.success ? 1 : 0) << ',' << e.steps << '\n';
  }
  return out.str();
}

void emit_csv(const SuiteResult& result, const std::string& path) {
  if (result.episodes.empty()) throw Error(ErrorCode::PreconditionViolated, "empty suite result");
  write_text(path, csv_text(result));
}

std::vector<EpisodeRecord> parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != "family,map,agents,seed,mode,H,success,steps") {
    throw Error(ErrorCode::BadConfig, "unexpected CSV header");
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(trim(line));
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw Error(ErrorCode::BadConfig, "CSV row needs 8 fields: " + line);
    EpisodeRecord e;
    e.family = f[0];
    e.map = parse_number<int>("map", f[1]);
    e.agents = parse_number<int>("agents", f[2]);
    e.seed = parse_number<int>("seed", f[3]);
    e.mode = f[4];
    e.horizon = parse_number<int>("H", f[5]);
    e.success = parse_number<int>("success", f[6]) != 0;
    e.steps = parse_number<int>("steps", f[7]);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EpisodeRecord> read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

std::string plot_svg(const SuiteResult& result) {
  constexpr int kW = 640, kH = 400, kLeft = 60, kRight = 170, kTop = 30, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  int max_agents = 1;
  for (const auto& p : result.points) max_agents = std::max(max_agents, p.agents);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](int a) { return kLeft + pw * a / max_agents; };
  auto sy = [&](double sr) { return kTop + ph * (1.0 - sr); };

  std::map<std::tuple<std::string, std::string, int>, std::vector<const SuitePoint*>> series;
  for (const auto& p : result.points) series[{p.family, p.mode, p.horizon}].push_back(&p);

  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
      << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double sr = i / 4.0;
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << sy(sr) + 4 << "\" text-anchor=\"end\">" << sr << "</text>\n";
  }
  std::vector<int> ticks;
  for (const auto& p : result.points) ticks.push_back(p.agents);
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (int a : ticks) {
    out << "<text x=\"" << sx(a) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << a << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">agents</text>\n"
      << "<text x=\"15\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << kTop + ph / 2 << ")\">success rate</text>\n";

  int idx = 0;
  for (const auto& [key, pts] : series) {
    const char* color = kColors[idx % std::size(kColors)];
    const auto& [family, mode, h] = key;
    std::string label = family + " " + mode + (h > 0 ? " H=" + std::to_string(h) : "");
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const SuitePoint* p : pts) out << sx(p->agents) << ',' << sy(p->success_rate) << ' ';
    out << "\"/>\n";
    for (const SuitePoint* p : pts) {
      out << "<circle cx=\"" << sx(p->agents) << "\" cy=\"" << sy(p->success_rate) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 14.0 * idx;
    out << "<line x1=\"" << kW - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kW - kRight + 35 << "\" y=\"" << ly + 4 << "\">" << xml_escape(label) << "</text>\n";
    ++idx;
  }
  out << "</svg>\n";
  return out.str();
}

void emit_plot(const SuiteResult& result, const std::string& path) {
  if (result.points.empty()) throw Error(ErrorCode::PreconditionViolated, "empty suite result");
  write_text(path, plot_svg(result));
}

}  // namespace mapfw
