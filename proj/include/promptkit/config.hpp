#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "promptkit/errors.hpp"

namespace promptkit {

// Flat `key = value` run configuration with environment overrides. The
// canonical serialized form feeds the config digest, so identical configs
// always produce identical artifact fingerprints.
//
// An environment variable PROMPTKIT_<KEY> (upper-cased, '.' and '-' mapped
// to '_') overrides the file value, e.g. PROMPTKIT_SEARCH_ITERATIONS.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": empty key");
      cfg.values_[key] = value;
    }
    cfg.apply_env_overrides();
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& key) const {
    const auto v = get(key);
    if (!v || v->empty())
      throw ValidationError("config is missing required field: " + key);
    return *v;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    const auto v = get(key);
    return v ? *v : fallback;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stoull(*v);
    } catch (...) {
      throw ValidationError("config field " + key + " is not an integer: " +
                            *v);
    }
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (...) {
      throw ValidationError("config field " + key + " is not a number: " + *v);
    }
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    const auto v = get(key);
    if (!v) return out;
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Canonical "key = value" lines, sorted by key.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  // FNV-1a fingerprint of the canonical form, embedded in every artifact.
  std::string digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  void apply_env_overrides() {
    for (auto& [key, value] : values_) {
      std::string env_key = "PROMPTKIT_";
      for (char c : key) {
        if (c == '.' || c == '-')
          env_key += '_';
        else
          env_key += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      if (const char* env = std::getenv(env_key.c_str())) value = env;
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace promptkit
