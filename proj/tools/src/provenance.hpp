#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mapfw::cli {

// Provenance of one CLI run: the exact argument vector, the build it ran on,
// the seeds it used and hashes of every input it read.
struct RunRecord {
  std::string subcommand;
  std::vector<std::string> argv;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;  // path -> fnv1a64 hex of contents
  std::vector<std::string> outputs;

  void add_input(const std::string& path);
  void write(const std::string& path) const;
};

std::string hash_file(const std::string& path);

}  // namespace mapfw::cli
