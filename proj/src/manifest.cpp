#include "caudit/manifest.hpp"

#include <ctime>

#include "caudit/digest.hpp"
#include "caudit/domain.hpp"
#include "caudit/ingest.hpp"
#include "json.hpp"

namespace caudit {

namespace {

std::string utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string write_manifest(const std::string& dir, const RunManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["format"] = kManifestFormat;
  doc["tool_version"] = kToolVersion;
  doc["subcommand"] = manifest.subcommand;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& path : manifest.input_paths) {
    nlohmann::ordered_json entry;
    entry["path"] = path;
    entry["sha256"] = sha256_hex_of_file(path);
    inputs.push_back(std::move(entry));
  }
  doc["inputs"] = std::move(inputs);
  if (manifest.seed) doc["seed"] = *manifest.seed;
  doc["outputs"] = manifest.output_names;
  doc["created_utc"] = utc_now();

  std::string path = dir + "/manifest.json";
  ingest::write_text_file(path, doc.dump(1) + "\n");
  return path;
}

}  // namespace caudit
