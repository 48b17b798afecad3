#include "mapfw/mapgen.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"

namespace mapfw {

namespace {

constexpr double kEarthRadius = 6378137.0;
constexpr double kMetersPerDegree = kEarthRadius * std::numbers::pi / 180.0;

}  // namespace

// ---------------------------------------------------------------- tag rules

TagRules TagRules::defaults() {
  TagRules t;
  for (const char* v : {"footway", "path", "steps", "cycleway", "track", "pedestrian", "service"})
    t.rules.push_back({true, "highway", v, 3});
  for (const char* v : {"living_street", "residential", "unclassified", "tertiary", "secondary", "primary"})
    t.rules.push_back({true, "highway", v, 5});
  t.rules.push_back({false, "building", "*", 0});
  t.rules.push_back({false, "natural", "water", 0});
  t.rules.push_back({false, "natural", "wood", 0});
  t.rules.push_back({false, "landuse", "industrial", 0});
  t.rules.push_back({false, "landuse", "construction", 0});
  t.rules.push_back({false, "barrier", "*", 0});
  return t;
}

TagRules TagRules::parse(std::string_view text) {
  TagRules t;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string kind;
    if (!(fields >> kind)) continue;
    TagRule r;
    if (kind != "walkable" && kind != "obstacle") {
      throw Error(ErrorCode::BadConfig, "tag rules line " + std::to_string(lineno) + ": unknown kind " + kind);
    }
    r.walkable = kind == "walkable";
    if (!(fields >> r.key >> r.value)) {
      throw Error(ErrorCode::BadConfig, "tag rules line " + std::to_string(lineno) + ": expected key and value");
    }
    if (r.walkable && (!(fields >> r.width) || r.width < 1 || r.width % 2 == 0)) {
      throw Error(ErrorCode::BadConfig, "tag rules line " + std::to_string(lineno) + ": width must be a positive odd number");
    }
    t.rules.push_back(r);
  }
  return t;
}

std::string TagRules::to_text() const {
  std::ostringstream out;
  for (const auto& r : rules) {
    out << (r.walkable ? "walkable " : "obstacle ") << r.key << ' ' << r.value;
    if (r.walkable) out << ' ' << r.width;
    out << '\n';
  }
  return out.str();
}

void RasterConfig::validate() const {
  if (!(resolution > 0.0)) throw Error(ErrorCode::BadConfig, "resolution must be positive");
  if (tile_size < 16) throw Error(ErrorCode::BadConfig, "tile size must be at least 16");
  if (kernel_radius < 0) throw Error(ErrorCode::BadConfig, "kernel radius must be non-negative");
}

// ---------------------------------------------------------------- OSM parsing

GeoFeatures parse_osm(std::string_view document, const TagRules& tags) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(document)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::MalformedXml, e.what());
  }
  const auto osm = tree.get_child_optional("osm");
  if (!osm) throw Error(ErrorCode::MalformedXml, "missing <osm> root element");

  GeoFeatures f;
  std::unordered_map<std::string, LatLon> nodes;
  bool have_bounds = false;
  try {
    for (const auto& [tag, child] : *osm) {
      if (tag == "node") {
        const auto& a = child.get_child("<xmlattr>");
        nodes[a.get<std::string>("id")] = {a.get<double>("lat"), a.get<double>("lon")};
      } else if (tag == "bounds") {
        const auto& a = child.get_child("<xmlattr>");
        f.bbox = {a.get<double>("minlat"), a.get<double>("minlon"), a.get<double>("maxlat"), a.get<double>("maxlon")};
        have_bounds = true;
      }
    }
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorCode::MalformedXml, std::string("bad node or bounds element: ") + e.what());
  }

  for (const auto& [tag, child] : *osm) {
    if (tag != "way") continue;
    std::vector<std::string> refs;
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& [sub, el] : child) {
      if (sub == "nd") {
        refs.push_back(el.get<std::string>("<xmlattr>.ref", ""));
      } else if (sub == "tag") {
        kv.emplace_back(el.get<std::string>("<xmlattr>.k", ""), el.get<std::string>("<xmlattr>.v", ""));
      }
    }
    const TagRule* match = nullptr;
    // Obstacle rules are checked first so that a tagged building is never walkable.
    for (bool walkable : {false, true}) {
      for (const auto& r : tags.rules) {
        if (r.walkable != walkable || match) continue;
        for (const auto& [k, v] : kv)
          if (k == r.key && (r.value == "*" || v == r.value)) match = &r;
      }
    }
    if (!match) continue;

    std::vector<LatLon> pts;
    for (const auto& ref : refs) {
      auto it = nodes.find(ref);
      if (it == nodes.end()) {
        throw Error(ErrorCode::MissingNodeRef, "way " + child.get<std::string>("<xmlattr>.id", "?") +
                                                   " references missing node " + ref);
      }
      pts.push_back(it->second);
    }
    if (pts.size() < 2) continue;
    if (match->walkable) {
      std::string highway;
      for (const auto& [k, v] : kv)
        if (k == match->key) highway = v;
      f.ways.push_back({std::move(pts), match->width, highway});
    } else {
      const bool closed = refs.size() >= 4 && refs.front() == refs.back();
      f.obstacles.push_back({std::move(pts), closed && match->key != "barrier"});
    }
  }

  if (!have_bounds && !nodes.empty()) {
    f.bbox = {1e9, 1e9, -1e9, -1e9};
    for (const auto& [id, p] : nodes) {
      f.bbox.min_lat = std::min(f.bbox.min_lat, p.lat);
      f.bbox.max_lat = std::max(f.bbox.max_lat, p.lat);
      f.bbox.min_lon = std::min(f.bbox.min_lon, p.lon);
      f.bbox.max_lon = std::max(f.bbox.max_lon, p.lon);
    }
  }
  return f;
}

// ---------------------------------------------------------------- rasterization

namespace {

struct Projection {
  double lat_c, lon_c, coslat;
  double x_min, y_max;
  double res;
  int width, height;

  Projection(const BBox& b, double resolution) : res(resolution) {
    if (!(b.max_lat > b.min_lat) || !(b.max_lon > b.min_lon)) throw Error(ErrorCode::EmptyBBox, "bounding box has no area");
    lat_c = 0.5 * (b.min_lat + b.max_lat);
    lon_c = 0.5 * (b.min_lon + b.max_lon);
    coslat = std::cos(lat_c * std::numbers::pi / 180.0);
    x_min = (b.min_lon - lon_c) * coslat * kMetersPerDegree;
    y_max = (b.max_lat - lat_c) * kMetersPerDegree;
    const double w_m = (b.max_lon - b.min_lon) * coslat * kMetersPerDegree;
    const double h_m = (b.max_lat - b.min_lat) * kMetersPerDegree;
    width = std::max(1, static_cast<int>(std::ceil(w_m / res - 1e-9)));
    height = std::max(1, static_cast<int>(std::ceil(h_m / res - 1e-9)));
  }

  // Continuous cell coordinates: column and row measured in cells from the top-left corner.
  std::pair<double, double> to_cells(LatLon p) const {
    const double x = (p.lon - lon_c) * coslat * kMetersPerDegree;
    const double y = (p.lat - lat_c) * kMetersPerDegree;
    return {(x - x_min) / res, (y_max - y) / res};
  }

  LatLon to_latlon(double col, double row) const {
    const double x = x_min + col * res;
    const double y = y_max - row * res;
    return {lat_c + y / kMetersPerDegree, lon_c + x / (coslat * kMetersPerDegree)};
  }
};

void stamp_polyline(GridMap& m, const Projection& proj, const std::vector<LatLon>& pts, int width, Cell value) {
  const int rad = (width - 1) / 2;
  auto stamp = [&](double cx, double cy) {
    const int c0 = static_cast<int>(std::floor(cx));
    const int r0 = static_cast<int>(std::floor(cy));
    for (int r = r0 - rad; r <= r0 + rad; ++r)
      for (int c = c0 - rad; c <= c0 + rad; ++c)
        if (m.in_bounds({r, c})) m.set({r, c}, value);
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [x0, y0] = proj.to_cells(pts[i]);
    const auto [x1, y1] = proj.to_cells(pts[i + 1]);
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int n = std::max(1, static_cast<int>(std::ceil(len / 0.25)));
    for (int k = 0; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      stamp(x0 + t * (x1 - x0), y0 + t * (y1 - y0));
    }
  }
}

bool inside_ring(const std::vector<std::pair<double, double>>& ring, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto [xi, yi] = ring[i];
    const auto [xj, yj] = ring[j];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

void fill_ring(GridMap& m, const Projection& proj, const std::vector<LatLon>& pts) {
  std::vector<std::pair<double, double>> ring;
  double xmin = 1e18, xmax = -1e18, ymin = 1e18, ymax = -1e18;
  for (const auto& p : pts) {
    ring.push_back(proj.to_cells(p));
    xmin = std::min(xmin, ring.back().first);
    xmax = std::max(xmax, ring.back().first);
    ymin = std::min(ymin, ring.back().second);
    ymax = std::max(ymax, ring.back().second);
  }
  const int r_lo = std::max(0, static_cast<int>(std::floor(ymin)));
  const int r_hi = std::min(m.height() - 1, static_cast<int>(std::ceil(ymax)));
  const int c_lo = std::max(0, static_cast<int>(std::floor(xmin)));
  const int c_hi = std::min(m.width() - 1, static_cast<int>(std::ceil(xmax)));
  for (int r = r_lo; r <= r_hi; ++r)
    for (int c = c_lo; c <= c_hi; ++c)
      if (inside_ring(ring, c + 0.5, r + 0.5)) m.set({r, c}, Cell::Obstacle);
}

}  // namespace

GridMap rasterize(const GeoFeatures& features, const RasterConfig& config) {
  config.validate();
  const Projection proj(features.bbox, config.resolution);
  GridMap m(proj.width, proj.height, Cell::Obstacle);
  for (const auto& w : features.ways) stamp_polyline(m, proj, w.points, w.width_cells, Cell::Free);
  for (const auto& o : features.obstacles) {
    if (o.ring) {
      fill_ring(m, proj, o.points);
    } else {
      stamp_polyline(m, proj, o.points, 1, Cell::Obstacle);
    }
  }
  return m;
}

BBox cell_block_bbox(const BBox& bbox, const RasterConfig& config, int row0, int col0, int rows, int cols) {
  const Projection proj(bbox, config.resolution);
  const LatLon top_left = proj.to_latlon(col0, row0);
  const LatLon bottom_right = proj.to_latlon(col0 + cols, row0 + rows);
  return {bottom_right.lat, top_left.lon, top_left.lat, bottom_right.lon};
}

// ---------------------------------------------------------------- morphology

namespace {

using Mask = std::vector<char>;

// Square-window max (dilate) or min (erode) over in-bounds cells, done as two 1-D passes.
Mask window_op(const Mask& in, int w, int h, int rad, bool dilate) {
  if (rad == 0) return in;
  Mask tmp(in.size()), out(in.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      char v = dilate ? 0 : 1;
      for (int k = std::max(0, c - rad); k <= std::min(w - 1, c + rad); ++k)
        v = dilate ? (v | in[r * w + k]) : (v & in[r * w + k]);
      tmp[r * w + c] = v;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      char v = dilate ? 0 : 1;
      for (int k = std::max(0, r - rad); k <= std::min(h - 1, r + rad); ++k)
        v = dilate ? (v | tmp[k * w + c]) : (v & tmp[k * w + c]);
      out[r * w + c] = v;
    }
  return out;
}

Mask open_close(const Mask& free, int w, int h, int rad) {
  Mask closed = window_op(window_op(free, w, h, rad, true), w, h, rad, false);
  return window_op(window_op(closed, w, h, rad, false), w, h, rad, true);
}

Mask majority(const Mask& in, int w, int h) {
  Mask out(in.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      int on = 0, total = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          ++total;
          on += in[rr * w + cc];
        }
      out[r * w + c] = 2 * on > total ? 1 : (2 * on == total ? in[r * w + c] : 0);
    }
  return out;
}

}  // namespace

GridMap morph_clean(const GridMap& map, const RasterConfig& config) {
  config.validate();
  const int w = map.width(), h = map.height(), rad = config.kernel_radius;
  Mask free(map.size());
  for (int i = 0; i < map.size(); ++i) free[i] = map.cells()[i] == Cell::Free;

  Mask out;
  if (!config.smoothing) {
    out = open_close(free, w, h, rad);
  } else {
    // Iterate to a fixed point so that a second pass changes nothing. Each
    // round stays inside the closing of its input, hence of the original.
    // Boundary drift can take tens of rounds to settle on real tiles.
    constexpr int kMaxRounds = 1024;
    out = free;
    for (int round = 0; round < kMaxRounds; ++round) {
      const Mask closing = window_op(window_op(out, w, h, rad, true), w, h, rad, false);
      Mask next = majority(out, w, h);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] &= closing[i];
      next = open_close(next, w, h, rad);
      if (next == out) break;
      out = std::move(next);
    }
  }
  std::vector<Cell> cells(map.size());
  for (int i = 0; i < map.size(); ++i) cells[i] = out[i] ? Cell::Free : Cell::Obstacle;
  return GridMap(w, h, std::move(cells), map.name());
}

// ---------------------------------------------------------------- tiling

std::vector<Tile> tile(const GridMap& map, const RasterConfig& config) {
  config.validate();
  const int t = config.tile_size;
  if (map.width() < t || map.height() < t) {
    throw Error(ErrorCode::MapTooSmall, "map is smaller than one " + std::to_string(t) + "x" + std::to_string(t) + " tile");
  }
  std::vector<Tile> out;
  for (int tr = 0; tr < map.height() / t; ++tr) {
    for (int tc = 0; tc < map.width() / t; ++tc) {
      GridMap sub(t, t, Cell::Obstacle, map.name() + "_r" + std::to_string(tr) + "_c" + std::to_string(tc));
      for (int r = 0; r < t; ++r)
        for (int c = 0; c < t; ++c) sub.set({r, c}, map.at({tr * t + r, tc * t + c}));
      const double frac = static_cast<double>(sub.free_count()) / (static_cast<double>(t) * t);
      if (frac < 0.05) continue;
      out.push_back({std::move(sub), tr, tc, frac});
    }
  }
  return out;
}

// ---------------------------------------------------------------- synthetic families

GridMap gen_random(int width, int height, double obstacle_density, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(ErrorCode::BadDimensions, "map dimensions must be positive");
  if (!(obstacle_density >= 0.0 && obstacle_density <= 0.6)) {
    throw Error(ErrorCode::PreconditionViolated, "obstacle density must be in [0, 0.6]");
  }
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(hash_seed({seed, static_cast<std::uint64_t>(attempt)}));
    GridMap m(width, height, Cell::Free);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (rng.uniform() < obstacle_density) m.set({r, c}, Cell::Obstacle);
    const int free = m.free_count();
    if (free == 0) continue;
    const auto labels = component_labels(m);
    std::vector<int> sizes;
    for (int l : labels) {
      if (l < 0) continue;
      if (l >= static_cast<int>(sizes.size())) sizes.resize(l + 1, 0);
      ++sizes[l];
    }
    if (5 * *std::max_element(sizes.begin(), sizes.end()) >= 4 * free) {
      std::ostringstream name;
      name << "random-" << width << "x" << height << "-d" << std::lround(obstacle_density * 100) << "-s" << seed;
      m.set_name(name.str());
      return m;
    }
  }
  throw Error(ErrorCode::Degenerate, "no map with a dominant free component after " + std::to_string(kMaxAttempts) + " attempts");
}

GridMap gen_maze(int width, int height, std::uint64_t seed) {
  if (width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0) {
    throw Error(ErrorCode::BadDimensions, "maze dimensions must be odd and at least 5");
  }
  Rng rng(seed);
  GridMap m(width, height, Cell::Obstacle, "maze-" + std::to_string(width) + "x" + std::to_string(height) + "-s" + std::to_string(seed));
  const int lr = height / 2, lc = width / 2;  // lattice size
  std::vector<char> seen(static_cast<std::size_t>(lr) * lc, 0);
  std::vector<std::pair<int, int>> stack{{0, 0}};
  seen[0] = 1;
  m.set({1, 1}, Cell::Free);
  while (!stack.empty()) {
    const auto [r, c] = stack.back();
    std::vector<std::pair<int, int>> next;
    for (Action a : kMoves) {
      const Coord d = action_delta(a);
      const int nr = r + d.row, nc = c + d.col;
      if (nr >= 0 && nr < lr && nc >= 0 && nc < lc && !seen[nr * lc + nc]) next.emplace_back(nr, nc);
    }
    if (next.empty()) {
      stack.pop_back();
      continue;
    }
    const auto [nr, nc] = next[rng.below(next.size())];
    seen[nr * lc + nc] = 1;
    m.set({2 * r + 1 + (nr - r), 2 * c + 1 + (nc - c)}, Cell::Free);
    m.set({2 * nr + 1, 2 * nc + 1}, Cell::Free);
    stack.emplace_back(nr, nc);
  }

  // Walls between two lattice cells that are still closed.
  std::vector<Coord> walls;
  for (int r = 1; r < height - 1; ++r)
    for (int c = 1; c < width - 1; ++c)
      if ((r % 2) != (c % 2) && m.at({r, c}) == Cell::Obstacle) walls.push_back({r, c});
  rng.shuffle(std::span<Coord>(walls));
  const auto n_remove = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(walls.size())));
  for (std::size_t i = 0; i < n_remove; ++i) m.set(walls[i], Cell::Free);
  return m;
}

GridMap gen_warehouse(const WarehouseParams& p) {
  if (p.rows < 1 || p.cols < 1 || p.shelf_len < 1 || p.aisle_w < 1) {
    throw Error(ErrorCode::BadDimensions, "warehouse parameters must be positive");
  }
  const int height = p.rows + (p.rows + 1) * p.aisle_w;
  const int width = p.cols * p.shelf_len + (p.cols + 1) * p.aisle_w;
  GridMap m(width, height, Cell::Free,
            "warehouse-" + std::to_string(height) + "x" + std::to_string(width));
  for (int i = 0; i < p.rows; ++i) {
    const int r = p.aisle_w + i * (1 + p.aisle_w);
    for (int j = 0; j < p.cols; ++j) {
      const int c0 = p.aisle_w + j * (p.shelf_len + p.aisle_w);
      for (int c = c0; c < c0 + p.shelf_len; ++c) m.set({r, c}, Cell::Obstacle);
    }
  }
  return m;
}

// ---------------------------------------------------------------- pipeline

std::vector<ManifestRow> osm_to_tiles(std::string_view document, const std::string& name, const RasterConfig& config,
                                      std::vector<GridMap>& tiles_out) {
  const GeoFeatures f = parse_osm(document, config.tags);
  GridMap raster = rasterize(f, config);
  raster.set_name(name);
  const GridMap clean = morph_clean(raster, config);
  std::vector<ManifestRow> rows;
  for (Tile& t : tile(clean, config)) {
    rows.push_back({t.map.name(),
                    cell_block_bbox(f.bbox, config, t.row * config.tile_size, t.col * config.tile_size,
                                    config.tile_size, config.tile_size),
                    t.free_fraction});
    tiles_out.push_back(std::move(t.map));
  }
  return rows;
}

std::string manifest_csv(const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << "tile,min_lat,min_lon,max_lat,max_lon,free_fraction\n" << std::fixed;
  for (const auto& r : rows) {
    out << r.name << ',' << std::setprecision(7) << r.bbox.min_lat << ',' << r.bbox.min_lon << ',' << r.bbox.max_lat
        << ',' << r.bbox.max_lon << ',' << std::setprecision(4) << r.free_fraction << '\n';
  }
  return out.str();
}

}  // namespace mapfw
