#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "promptkit/errors.hpp"
#include "promptkit/lm.hpp"
#include "promptkit/stub_lm.hpp"

namespace promptkit {

// Adapter registry keyed by model id. Ids are either names registered
// directly (tests, embedded fixtures) or scheme-prefixed specs resolved by a
// factory, e.g. "stub:data/demo/models/alpha.json". Resolved handles are
// cached, so repeated lookups share one instance.
class ModelRegistry {
 public:
  using Factory = std::function<LMHandlePtr(const std::string& spec)>;

  static ModelRegistry& instance() {
    static ModelRegistry registry;
    return registry;
  }

  void register_scheme(const std::string& scheme, Factory factory) {
    schemes_[scheme] = std::move(factory);
  }

  void register_model(const std::string& model_id, LMHandlePtr handle) {
    cache_[model_id] = std::move(handle);
  }

  LMHandlePtr resolve(const std::string& model_id) {
    const auto hit = cache_.find(model_id);
    if (hit != cache_.end()) return hit->second;

    const auto colon = model_id.find(':');
    if (colon != std::string::npos) {
      const auto scheme = schemes_.find(model_id.substr(0, colon));
      if (scheme != schemes_.end()) {
        LMHandlePtr handle = scheme->second(model_id.substr(colon + 1));
        cache_[model_id] = handle;
        return handle;
      }
    }
    throw AdapterError("unknown model id: " + model_id);
  }

  void clear_cache() { cache_.clear(); }

 private:
  ModelRegistry() {
    register_scheme("stub", [](const std::string& path) -> LMHandlePtr {
      return load_stub_model(path);
    });
  }

  std::map<std::string, Factory> schemes_;
  std::map<std::string, LMHandlePtr> cache_;
};

inline LMHandlePtr resolve_model(const std::string& model_id) {
  return ModelRegistry::instance().resolve(model_id);
}

}  // namespace promptkit
