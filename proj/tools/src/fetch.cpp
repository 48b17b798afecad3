#include "fetch.hpp"

#include <cstdlib>
#include <sstream>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "mapfw/error.hpp"

namespace mapfw::cli {

BBox parse_bbox(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadConfig, "bad bbox component '" + part + "'");
    }
  }
  if (v.size() != 4 || v[0] >= v[2] || v[1] >= v[3]) {
    throw Error(ErrorCode::BadConfig, "bbox must be min_lat,min_lon,max_lat,max_lon with min < max");
  }
  return {v[0], v[1], v[2], v[3]};
}

std::string fetch_osm(const BBox& bbox) {
  const char* env = std::getenv("MAPGEN_OSM_URL");
  const std::string url = env && *env ? env : kDefaultOsmUrl;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::BadConfig, "MAPGEN_OSM_URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  std::ostringstream query;
  query.precision(9);
  query << (path.find('?') == std::string::npos ? '?' : '&') << "bbox=" << bbox.min_lon << ',' << bbox.min_lat << ','
        << bbox.max_lon << ',' << bbox.max_lat;
  path += query.str();

  httplib::Client client(origin);
  client.set_follow_location(true);
  client.set_read_timeout(120);
  auto res = client.Get(path);
  if (!res) throw Error(ErrorCode::IoFailure, "request to " + origin + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorCode::IoFailure, "request to " + origin + path + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace mapfw::cli
