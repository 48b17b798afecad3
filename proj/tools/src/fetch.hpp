#pragma once

#include <string>

#include "mapfw/mapgen.hpp"

namespace mapfw::cli {

inline constexpr const char* kDefaultOsmUrl = "https://overpass-api.de/api/map";

// Downloads OSM XML for `bbox` from $MAPGEN_OSM_URL (or the default endpoint),
// appending ?bbox=min_lon,min_lat,max_lon,max_lat. Throws IoFailure.
std::string fetch_osm(const BBox& bbox);

// "min_lat,min_lon,max_lat,max_lon"; throws BadConfig.
BBox parse_bbox(const std::string& text);

}  // namespace mapfw::cli
