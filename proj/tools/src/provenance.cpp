#include "provenance.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mapfw/bench.hpp"
#include "mapfw/error.hpp"
#include "mapfw/rng.hpp"

namespace mapfw::cli {

std::string hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ss.str())));
  return buf;
}

void RunRecord::add_input(const std::string& path) { inputs[path] = hash_file(path); }

void RunRecord::write(const std::string& path) const {
  nlohmann::json j;
  j["tool"] = "mapfw";
  j["version"] = MAPFW_VERSION;
  j["commit"] = build_commit();
  j["subcommand"] = subcommand;
  j["argv"] = argv;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write provenance '" + path + "'");
  f << j.dump(2) << '\n';
}

}  // namespace mapfw::cli
