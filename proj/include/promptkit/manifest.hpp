#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptkit/config.hpp"
#include "promptkit/errors.hpp"

namespace promptkit {

// FNV-1a fingerprint of a file's bytes; used for dataset digests in run
// manifests.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot digest missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(hex);
}

// Machine-readable record of what a command ran with: command, full config,
// seed, model ids, dataset digests and produced outputs. Deliberately free
// of timestamps so reruns are byte-identical.
struct RunManifest {
  std::string command;
  RunConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> model_ids;
  std::map<std::string, std::string> dataset_digests;  // path -> digest
  std::vector<std::string> outputs;
  std::map<std::string, std::string> notes;

  void save(const std::string& path) const {
    nlohmann::json j;
    j["schema"] = "promptkit/run-manifest/v1";
    j["command"] = command;
    j["config"] = config.values();
    j["config_digest"] = config.digest();
    j["seed"] = seed;
    j["model_ids"] = model_ids;
    j["dataset_digests"] = dataset_digests;
    j["outputs"] = outputs;
    if (!notes.empty()) j["notes"] = notes;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << j.dump(1) << '\n';
  }
};

}  // namespace promptkit
