#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mapfw/grid.hpp"

namespace mapfw {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct BBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;
};

struct WalkableWay {
  std::vector<LatLon> points;
  int width_cells = 3;
  std::string highway;
};

struct ObstacleShape {
  std::vector<LatLon> points;
  bool ring = false;  // closed polygon; otherwise a 1-cell polyline
};

struct GeoFeatures {
  std::vector<WalkableWay> ways;
  std::vector<ObstacleShape> obstacles;
  BBox bbox;
};

// Which OSM tags mark walkable ways (with stamp width) and obstacles.
// Text form, one rule per line, '#' comments:
//   walkable highway footway 3
//   obstacle building *
struct TagRule {
  bool walkable = false;
  std::string key;
  std::string value;  // "*" matches any value
  int width = 0;
};

struct TagRules {
  std::vector<TagRule> rules;

  static TagRules defaults();
  static TagRules parse(std::string_view text);
  std::string to_text() const;
};

struct RasterConfig {
  double resolution = 1.0;  // meters per cell
  int tile_size = 256;
  int kernel_radius = 1;
  bool smoothing = false;
  TagRules tags = TagRules::defaults();

  void validate() const;
};

GeoFeatures parse_osm(std::string_view document, const TagRules& tags = TagRules::defaults());

// Equirectangular projection about the bbox center.
GridMap rasterize(const GeoFeatures& features, const RasterConfig& config);

// Lat/lon box covered by a block of cells of a raster built from `bbox`.
BBox cell_block_bbox(const BBox& bbox, const RasterConfig& config, int row0, int col0, int rows, int cols);

GridMap morph_clean(const GridMap& map, const RasterConfig& config);

struct Tile {
  GridMap map;
  int row = 0;
  int col = 0;
  double free_fraction = 0.0;
};

std::vector<Tile> tile(const GridMap& map, const RasterConfig& config);

GridMap gen_random(int width, int height, double obstacle_density, std::uint64_t seed);
GridMap gen_maze(int width, int height, std::uint64_t seed);

struct WarehouseParams {
  int rows = 16;
  int cols = 5;
  int shelf_len = 8;
  int aisle_w = 1;
};
GridMap gen_warehouse(const WarehouseParams& params = {});

struct ManifestRow {
  std::string name;
  BBox bbox;
  double free_fraction = 0.0;
};

// Full OSM pipeline: parse, rasterize, clean, tile. Tiles carry their bbox.
std::vector<ManifestRow> osm_to_tiles(std::string_view document, const std::string& name,
                                      const RasterConfig& config, std::vector<GridMap>& tiles_out);

std::string manifest_csv(const std::vector<ManifestRow>& rows);

}  // namespace mapfw
