#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "fetch.hpp"
#include "mapfw/bench.hpp"
#include "mapfw/error.hpp"
#include "mapfw/mapgen.hpp"
#include "mapfw/neural.hpp"
#include "mapfw/policy.hpp"
#include "mapfw/rng.hpp"
#include "mapfw/solvers.hpp"
#include "provenance.hpp"

namespace fs = std::filesystem;
using namespace mapfw;
using namespace mapfw::cli;

namespace {

// Bad flag combinations detected after parsing; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + dir + "': " + ec.message());
}

// Creates the directory that will hold `file`, if it names one.
void ensure_parent(const std::string& file) {
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

std::string sibling(const std::string& file, const std::string& suffix) { return file + suffix; }

std::vector<GridMap> load_map_dir(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.path().extension() == ".map") files.push_back(entry.path());
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list '" + dir + "'");
  std::sort(files.begin(), files.end());
  std::vector<GridMap> maps;
  for (const auto& f : files) maps.push_back(load_map_file(f.string()));
  if (maps.empty()) throw Error(ErrorCode::IoFailure, "no .map files in '" + dir + "'");
  return maps;
}

// ---- mapgen ---------------------------------------------------------------

struct MapgenArgs {
  std::string osm;
  std::string fetch;
  std::vector<int> random;
  std::vector<int> maze;
  bool warehouse = false;
  WarehouseParams wh;
  double density = 0.2;
  std::uint64_t seed = 0;
  double res = 1.0;
  int tile_size = 256;
  int kernel = 1;
  bool smooth = false;
  std::string tags;
  std::string name;
  std::string out = "maps";
};

int cmd_mapgen(const MapgenArgs& a, RunRecord& prov) {
  const int sources = !a.osm.empty() + !a.fetch.empty() + !a.random.empty() + !a.maze.empty() + a.warehouse;
  if (sources != 1) throw UsageError("mapgen needs exactly one of --osm, --fetch, --random, --maze, --warehouse");
  ensure_dir(a.out);
  prov.seeds["seed"] = a.seed;

  if (!a.osm.empty() || !a.fetch.empty()) {
    RasterConfig rc;
    rc.resolution = a.res;
    rc.tile_size = a.tile_size;
    rc.kernel_radius = a.kernel;
    rc.smoothing = a.smooth;
    if (!a.tags.empty()) {
      rc.tags = TagRules::parse(read_file(a.tags));
      prov.add_input(a.tags);
    }
    std::string doc;
    std::string name = a.name;
    if (!a.osm.empty()) {
      doc = read_file(a.osm);
      prov.add_input(a.osm);
      if (name.empty()) name = fs::path(a.osm).stem().string();
    } else {
      doc = fetch_osm(parse_bbox(a.fetch));
      const std::string raw = (fs::path(a.out) / "download.osm").string();
      std::ofstream(raw, std::ios::binary) << doc;
      prov.add_input(raw);
      if (name.empty()) name = "fetched";
    }
    std::vector<GridMap> tiles;
    const auto rows = osm_to_tiles(doc, name, rc, tiles);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      const std::string path = (fs::path(a.out) / (rows[i].name + ".map")).string();
      save_map_file(tiles[i], path);
      prov.outputs.push_back(path);
    }
    const std::string manifest = (fs::path(a.out) / "manifest.csv").string();
    std::ofstream(manifest, std::ios::binary) << manifest_csv(rows);
    prov.outputs.push_back(manifest);
    std::cout << "wrote " << tiles.size() << " tile(s) to " << a.out << "\n";
    return 0;
  }

  GridMap map;
  std::string name = a.name;
  if (!a.random.empty()) {
    map = gen_random(a.random[0], a.random[1], a.density, a.seed);
    if (name.empty()) name = "random_" + std::to_string(a.random[0]) + "x" + std::to_string(a.random[1]) + "_s" + std::to_string(a.seed);
  } else if (!a.maze.empty()) {
    map = gen_maze(a.maze[0], a.maze[1], a.seed);
    if (name.empty()) name = "maze_" + std::to_string(a.maze[0]) + "x" + std::to_string(a.maze[1]) + "_s" + std::to_string(a.seed);
  } else {
    map = gen_warehouse(a.wh);
    if (name.empty()) name = "warehouse";
  }
  const std::string path = (fs::path(a.out) / (name + ".map")).string();
  save_map_file(map, path);
  prov.outputs.push_back(path);
  std::cout << "wrote " << path << " (" << map.width() << "x" << map.height() << ")\n";
  return 0;
}

// ---- expert ---------------------------------------------------------------

struct ExpertArgs {
  std::string maps;
  std::string family = "empty";
  int size = 8;
  int map_count = 1;
  double density = 0.2;
  int instances = 100;
  std::string agents = "1-4";
  std::uint64_t seed = 0;
  int restarts = kDefaultMaxRestarts;
  bool augment = false;
  double floor = 0.0;
  std::string out;
  int jobs = 0;
};

std::pair<int, int> parse_agent_range(const std::string& s) {
  try {
    const auto dash = s.find('-');
    if (dash == std::string::npos) {
      const int n = std::stoi(s);
      return {n, n};
    }
    return {std::stoi(s.substr(0, dash)), std::stoi(s.substr(dash + 1))};
  } catch (const std::exception&) {
    throw UsageError("--agents expects N or LO-HI, got '" + s + "'");
  }
}

int cmd_expert(const ExpertArgs& a, RunRecord& prov) {
  std::vector<GridMap> maps;
  if (!a.maps.empty()) {
    maps = load_map_dir(a.maps);
    for (const auto& entry : fs::directory_iterator(a.maps))
      if (entry.path().extension() == ".map") prov.add_input(entry.path().string());
  } else {
    SuiteConfig sc;
    sc.family = parse_family(a.family);
    if (sc.family == Family::Osm) throw UsageError("use --maps DIR for map tiles");
    sc.width = sc.height = a.size;
    sc.maps = a.map_count;
    sc.density = a.density;
    sc.master_seed = a.seed;
    maps = suite_maps(sc);
  }
  ExpertDataConfig ec;
  ec.instances = a.instances;
  std::tie(ec.min_agents, ec.max_agents) = parse_agent_range(a.agents);
  if (ec.min_agents < 1 || ec.max_agents < ec.min_agents) throw UsageError("bad --agents range");
  ec.seed = a.seed;
  ec.max_restarts = a.restarts;
  ec.augment_symmetries = a.augment;
  prov.seeds["seed"] = a.seed;

  const ExpertData data = generate_expert_data(maps, ec, a.jobs);
  ensure_parent(a.out);
  write_dataset(a.out, data.samples);
  prov.outputs.push_back(a.out);
  std::printf("samples %zu\nsolve_rate %.4f (%d/%d)\n", data.samples.size(), data.solve_rate(), data.solved,
              data.attempted);
  if (data.solve_rate() < a.floor) {
    std::fprintf(stderr, "solve rate %.4f is below the floor %.4f\n", data.solve_rate(), a.floor);
    return 1;
  }
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log;
  std::string preset = "toy";
  int d_model = 0, layers = 0, heads = 0, ffn_mult = 0;
  std::string sre = "on";
  double lr = 0.0;
  int batch = 0;
  int warmup = -1;
  int steps = 1000;
  std::uint64_t seed = 0;
  std::string resume;
};

int cmd_train(const TrainArgs& a, RunRecord& prov) {
  ModelConfig c;
  if (a.preset == "toy") {
    c = ModelConfig::toy();
  } else if (a.preset != "default") {
    throw UsageError("--preset must be toy or default");
  }
  if (a.d_model > 0) c.d_model = a.d_model;
  if (a.layers > 0) c.n_layers = a.layers;
  if (a.heads > 0) c.n_heads = a.heads;
  if (a.ffn_mult > 0) c.ffn_mult = a.ffn_mult;
  if (a.sre != "on" && a.sre != "off") throw UsageError("--sre must be on or off");
  c.sre_enabled = a.sre == "on";
  if (a.lr > 0) c.learning_rate = a.lr;
  if (a.batch > 0) c.batch_size = a.batch;
  if (a.warmup >= 0) c.warmup_steps = a.warmup;
  c.seed = a.seed;
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const Dataset ds = read_dataset(a.data);
  prov.add_input(a.data);
  prov.seeds["seed"] = a.seed;
  ModelParams resume;
  if (!a.resume.empty()) {
    resume = load_params(a.resume);
    prov.add_input(a.resume);
  }
  TrainOptions opts;
  opts.steps = a.steps;
  opts.on_step = [&](const TrainLogRow& r) {
    if (r.step % 100 == 0) {
      std::printf("step %lld fast %.4f slow %.4f total %.4f\n", static_cast<long long>(r.step), r.fast_loss,
                  r.slow_loss, r.total_loss);
      std::fflush(stdout);
    }
  };
  const TrainResult res = train(ds.samples, c, opts, a.resume.empty() ? nullptr : &resume);
  ensure_parent(a.out);
  save_params(res.params, a.out);
  const std::string log = a.log.empty() ? sibling(a.out, ".train_log.csv") : a.log;
  ensure_parent(log);
  write_train_log_csv(log, res.log);
  prov.outputs = {a.out, log};
  std::printf("trained_steps %lld params %zu sre %s\n", static_cast<long long>(res.params.trained_steps),
              res.params.values.size(), c.sre_enabled ? "on" : "off");
  return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string params;
  std::string params_off;
  std::string config;
  std::string family;
  int size = 0;
  int maps = 0;
  std::vector<int> agents;
  int seeds = 0;
  int step_limit = 0;
  std::vector<std::string> modes;
  int horizon = 2;
  std::vector<int> horizons{2, 3, 4, 5};
  std::string ablation = "none";
  std::uint64_t master_seed = 0;
  bool master_seed_set = false;
  std::string out = "eval";
  int jobs = 0;
};

void print_points(const std::vector<SuitePoint>& points) {
  std::printf("%-10s %-9s %3s %7s %8s %10s %8s\n", "family", "mode", "H", "agents", "SR", "mean_steps", "episodes");
  for (const auto& p : points) {
    std::printf("%-10s %-9s %3d %7d %8.3f %10.2f %8d\n", p.family.c_str(), p.mode.c_str(), p.horizon, p.agents,
                p.success_rate, p.mean_steps, p.episodes);
  }
}

int cmd_eval(const EvalArgs& a, RunRecord& prov) {
  SuiteConfig sc;
  if (!a.config.empty()) {
    sc = load_suite_config(a.config);
    prov.add_input(a.config);
  }
  if (!a.family.empty()) sc.family = parse_family(a.family);
  if (a.size > 0) sc.width = sc.height = a.size;
  if (a.maps > 0) sc.maps = a.maps;
  if (!a.agents.empty()) sc.agent_counts = a.agents;
  if (a.seeds > 0) sc.seeds = a.seeds;
  if (a.step_limit > 0) sc.step_limit = a.step_limit;
  if (a.master_seed_set) sc.master_seed = a.master_seed;
  if (!a.modes.empty()) {
    sc.modes.clear();
    for (const auto& m : a.modes) sc.modes.push_back(ModeConfig{parse_mode(m), a.horizon});
  }
  try {
    sc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.ablation != "none" && a.ablation != "horizon" && a.ablation != "sre") {
    throw UsageError("--ablation must be none, horizon or sre");
  }
  if (a.ablation == "sre" && a.params_off.empty()) throw UsageError("--ablation sre needs --params-off");

  const ModelParams params = load_params(a.params);
  prov.add_input(a.params);
  prov.seeds["master_seed"] = sc.master_seed;
  ensure_dir(a.out);
  auto emit = [&](const SuiteResult& r, const std::string& stem) {
    const std::string csv = (fs::path(a.out) / (stem + ".csv")).string();
    const std::string svg = (fs::path(a.out) / (stem + ".svg")).string();
    emit_csv(r, csv);
    emit_plot(r, svg);
    prov.outputs.push_back(csv);
    prov.outputs.push_back(svg);
  };

  if (a.ablation == "sre") {
    const ModelParams off = load_params(a.params_off);
    prov.add_input(a.params_off);
    const SreAblation r = ablation_sre(sc, params, off, a.jobs);
    emit(r.with_sre, "results_sre_on");
    emit(r.without_sre, "results_sre_off");
    std::printf("SRE on\n");
    print_points(r.with_sre.points);
    std::printf("SRE off\n");
    print_points(r.without_sre.points);
    std::printf("%-10s %-9s %3s %8s %8s %8s\n", "family", "mode", "H", "SR_on", "SR_off", "delta");
    for (const auto& d : r.deltas) {
      std::printf("%-10s %-9s %3d %8.3f %8.3f %+8.3f\n", d.family.c_str(), d.mode.c_str(), d.horizon, d.sr_with,
                  d.sr_without, d.delta);
    }
    return 0;
  }
  const SuiteResult r =
      a.ablation == "horizon" ? ablation_horizon(sc, params, a.horizons, a.jobs) : run_suite(sc, params, a.jobs);
  emit(r, "results");
  print_points(r.points);
  return 0;
}

// ---- play -----------------------------------------------------------------

struct PlayArgs {
  std::string params;
  std::string map;
  std::vector<int> empty;
  int agents = 1;
  std::uint64_t seed = 0;
  std::string mode = "fast";
  int horizon = 2;
  int step_limit = 128;
  bool color = false;
};

char agent_char(int i) {
  static const char* kChars = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  return i < 36 ? kChars[i] : '*';
}

std::string render_frame(const ProblemInstance& inst, const std::vector<Coord>& pos, bool color) {
  const GridMap& m = inst.map;
  std::vector<int> who(m.size(), -1), goal(m.size(), -1);
  for (int i = 0; i < inst.num_agents(); ++i) {
    who[m.index(pos[i])] = i;
    goal[m.index(inst.agents[i].goal)] = i;
  }
  std::string out;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      const int k = m.index({r, c});
      if (who[k] >= 0) {
        const bool home = goal[k] == who[k];
        if (color) out += home ? "\x1b[32m" : "\x1b[33m";
        out += agent_char(who[k]);
        if (color) out += "\x1b[0m";
      } else if (goal[k] >= 0) {
        out += '+';
      } else {
        out += m.is_free({r, c}) ? '.' : '@';
      }
    }
    out += '\n';
  }
  return out;
}

int cmd_play(const PlayArgs& a, RunRecord& prov) {
  if (a.map.empty() == a.empty.empty()) throw UsageError("play needs exactly one of --map or --empty");
  ModeConfig mode{parse_mode(a.mode), a.horizon};
  try {
    mode.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.step_limit <= 0) throw UsageError("--step-limit must be positive");
  const ModelParams params = load_params(a.params);
  prov.add_input(a.params);
  GridMap map;
  if (!a.map.empty()) {
    map = load_map_file(a.map);
    prov.add_input(a.map);
  } else {
    map = GridMap(a.empty[0], a.empty[1]);
  }
  prov.seeds["seed"] = a.seed;
  const ProblemInstance inst = generate_instance(map, a.agents, a.seed);
  const EpisodeResult r = run_episode(inst, params, mode, a.step_limit, a.seed);
  for (int t = 0; t <= r.steps_used; ++t) {
    std::vector<Coord> pos;
    for (const Path& p : r.paths) pos.push_back(p[t]);
    std::cout << "step " << t << "\n" << render_frame(inst, pos, a.color) << "\n";
  }
  std::cout << (r.success ? "SUCCESS" : "FAILURE") << " steps=" << r.steps_used << "\n";
  return 0;
}

std::string default_provenance(const std::string& sub, const std::string& out) {
  if (sub == "mapgen" || sub == "eval") return (fs::path(out) / "provenance.json").string();
  if (sub == "expert" || sub == "train") return sibling(out, ".provenance.json");
  return "play.provenance.json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mapfw: map generation, expert data, training and evaluation for decentralized MAPF"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(MAPFW_VERSION) + " (" + build_commit() + ")");
  std::string provenance_path;
  app.add_option("--provenance", provenance_path, "Where to write the provenance JSON")->option_text("FILE");

  MapgenArgs mg;
  auto* mapgen = app.add_subcommand("mapgen", "Generate .map files from OSM or a synthetic family");
  mapgen->add_option("--osm", mg.osm, "OSM XML input")->check(CLI::ExistingFile);
  mapgen->add_option("--fetch", mg.fetch, "Download min_lat,min_lon,max_lat,max_lon from $MAPGEN_OSM_URL");
  mapgen->add_option("--random", mg.random, "Random map WIDTH HEIGHT")->expected(2);
  mapgen->add_option("--maze", mg.maze, "Maze WIDTH HEIGHT")->expected(2);
  mapgen->add_flag("--warehouse", mg.warehouse, "Warehouse layout");
  mapgen->add_option("--rows", mg.wh.rows, "Warehouse shelf rows")->capture_default_str();
  mapgen->add_option("--cols", mg.wh.cols, "Warehouse shelf columns")->capture_default_str();
  mapgen->add_option("--shelf-len", mg.wh.shelf_len, "Warehouse shelf length")->capture_default_str();
  mapgen->add_option("--aisle", mg.wh.aisle_w, "Warehouse aisle width")->capture_default_str();
  mapgen->add_option("--density", mg.density, "Obstacle density for --random")->capture_default_str();
  mapgen->add_option("--seed", mg.seed, "Generator seed")->capture_default_str();
  mapgen->add_option("--res", mg.res, "Meters per cell")->capture_default_str();
  mapgen->add_option("--tile", mg.tile_size, "Tile size in cells")->capture_default_str();
  mapgen->add_option("--kernel", mg.kernel, "Morphology kernel radius")->capture_default_str();
  mapgen->add_flag("--smooth", mg.smooth, "Boundary smoothing");
  mapgen->add_option("--tags", mg.tags, "Tag rule file")->check(CLI::ExistingFile);
  mapgen->add_option("--name", mg.name, "Output name stem");
  mapgen->add_option("--out", mg.out, "Output directory")->capture_default_str();

  ExpertArgs ex;
  auto* expert = app.add_subcommand("expert", "Solve instances with the expert and write an MWDS dataset");
  expert->add_option("--maps", ex.maps, "Directory of .map files")->check(CLI::ExistingDirectory);
  expert->add_option("--family", ex.family, "Synthetic family when --maps is absent")->capture_default_str();
  expert->add_option("--size", ex.size, "Synthetic map side")->capture_default_str();
  expert->add_option("--map-count", ex.map_count, "Synthetic map count")->capture_default_str();
  expert->add_option("--density", ex.density, "Obstacle density for random maps")->capture_default_str();
  expert->add_option("--instances", ex.instances, "Instances to solve")->capture_default_str();
  expert->add_option("--agents", ex.agents, "Agents per instance, N or LO-HI")->capture_default_str();
  expert->add_option("--seed", ex.seed, "Master seed")->capture_default_str();
  expert->add_option("--restarts", ex.restarts, "Expert restarts per instance")->capture_default_str();
  expert->add_flag("--augment", ex.augment, "Add the 7 other square symmetries of every solved plan");
  expert->add_option("--floor", ex.floor, "Minimum solve rate, else exit 1")->capture_default_str();
  expert->add_option("--out", ex.out, "Dataset file")->required();
  expert->add_option("--jobs", ex.jobs, "Worker threads (default: logical cores)");

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "Train the world model on an MWDS dataset");
  trainc->add_option("--data", tr.data, "Dataset file")->required()->check(CLI::ExistingFile);
  trainc->add_option("--out", tr.out, "Params file")->required();
  trainc->add_option("--log", tr.log, "Training log CSV (default: OUT.train_log.csv)");
  trainc->add_option("--preset", tr.preset, "toy or default")->capture_default_str();
  trainc->add_option("--d-model", tr.d_model, "Model width");
  trainc->add_option("--layers", tr.layers, "Transformer layers");
  trainc->add_option("--heads", tr.heads, "Attention heads");
  trainc->add_option("--ffn-mult", tr.ffn_mult, "Feed-forward width multiplier");
  trainc->add_option("--sre", tr.sre, "on or off")->capture_default_str();
  trainc->add_option("--lr", tr.lr, "Learning rate");
  trainc->add_option("--batch", tr.batch, "Batch size");
  trainc->add_option("--warmup", tr.warmup, "Warmup steps");
  trainc->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str();
  trainc->add_option("--seed", tr.seed, "Init and data-order seed")->capture_default_str();
  trainc->add_option("--resume", tr.resume, "Continue from a params file")->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Run a benchmark suite and write CSV and SVG results");
  eval->add_option("--params", ev.params, "Params file")->required()->check(CLI::ExistingFile);
  eval->add_option("--params-off", ev.params_off, "SRE-disabled params for --ablation sre")->check(CLI::ExistingFile);
  eval->add_option("--config", ev.config, "Suite config (key = value text)")->check(CLI::ExistingFile);
  eval->add_option("--family", ev.family, "random, maze, warehouse, empty or osm");
  eval->add_option("--size", ev.size, "Map side");
  eval->add_option("--maps", ev.maps, "Maps per family");
  eval->add_option("--agents", ev.agents, "Agent counts")->delimiter(',');
  eval->add_option("--seeds", ev.seeds, "Seeds per point");
  eval->add_option("--step-limit", ev.step_limit, "128 or 256");
  eval->add_option("--mode", ev.modes, "fast, slow or thinking (repeatable)");
  eval->add_option("--H", ev.horizon, "Horizon for slow and thinking")->capture_default_str();
  eval->add_option("--horizons", ev.horizons, "Horizons for --ablation horizon")->delimiter(',');
  eval->add_option("--ablation", ev.ablation, "none, horizon or sre")->capture_default_str();
  auto* ms = eval->add_option("--master-seed", ev.master_seed, "Suite master seed");
  eval->add_option("--out", ev.out, "Output directory")->capture_default_str();
  eval->add_option("--jobs", ev.jobs, "Worker threads (default: logical cores)");

  PlayArgs pl;
  auto* play = app.add_subcommand("play", "Print ASCII frames of one episode");
  play->add_option("--params", pl.params, "Params file")->required();
  play->add_option("--map", pl.map, "A .map file");
  play->add_option("--empty", pl.empty, "Empty map WIDTH HEIGHT")->expected(2);
  play->add_option("--agents", pl.agents, "Agent count")->capture_default_str();
  play->add_option("--seed", pl.seed, "Instance seed")->capture_default_str();
  play->add_option("--mode", pl.mode, "fast, slow or thinking")->capture_default_str();
  play->add_option("--H", pl.horizon, "Horizon")->capture_default_str();
  play->add_option("--step-limit", pl.step_limit, "Step limit")->capture_default_str();
  play->add_flag("--color", pl.color, "ANSI colors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (ex.jobs <= 0) ex.jobs = default_jobs();
  if (ev.jobs <= 0) ev.jobs = default_jobs();
  ev.master_seed_set = ms->count() > 0;

  RunRecord prov;
  prov.argv.assign(argv, argv + argc);
  std::string out_for_prov;
  try {
    int code = 0;
    if (*mapgen) {
      prov.subcommand = "mapgen";
      out_for_prov = mg.out;
      code = cmd_mapgen(mg, prov);
    } else if (*expert) {
      prov.subcommand = "expert";
      out_for_prov = ex.out;
      code = cmd_expert(ex, prov);
    } else if (*trainc) {
      prov.subcommand = "train";
      out_for_prov = tr.out;
      code = cmd_train(tr, prov);
    } else if (*eval) {
      prov.subcommand = "eval";
      out_for_prov = ev.out;
      code = cmd_eval(ev, prov);
    } else if (*play) {
      prov.subcommand = "play";
      code = cmd_play(pl, prov);
    }
    const std::string prov_path =
        provenance_path.empty() ? default_provenance(prov.subcommand, out_for_prov) : provenance_path;
    ensure_parent(prov_path);
    prov.write(prov_path);
    return code;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
