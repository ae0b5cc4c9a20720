#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace caudit {

// Every output directory gets exactly one manifest tying outputs to input
// digests. The created_utc field is the only non-reproducible byte in a run.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> input_paths;
  std::optional<uint64_t> seed;
  std::vector<std::string> output_names;  // relative to the output directory
};

// Writes <dir>/manifest.json; returns its path.
std::string write_manifest(const std::string& dir, const RunManifest& manifest);

}  // namespace caudit
