#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptkit/autoprompt.hpp"
#include "promptkit/errors.hpp"
#include "promptkit/template.hpp"

namespace promptkit {

// One stored prompt per relation, produced by a single (method, generator,
// evaluator, seed) run. The schema is what evaluation and analysis consume,
// so it stays stable and explicit.
struct PromptRecord {
  std::string relation_id;
  PromptTemplate prompt;
  double train_score = 0.0;  // mean gold log-likelihood on training facts
  double eval_score = 0.0;   // best evaluation-batch score seen during search
  std::string soft_blob;     // relative path of the vector blob, if any
};

struct PromptStore {
  std::string method;        // autoprompt | mixed | optiprompt | lpaqa | manual
  std::string generator_id;
  std::string evaluator_id;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::map<std::string, PromptRecord> records;  // keyed by relation

  std::map<std::string, PromptTemplate> templates() const {
    std::map<std::string, PromptTemplate> out;
    for (const auto& [rel, rec] : records) out.emplace(rel, rec.prompt);
    return out;
  }
};

inline void save_prompt_store(const PromptStore& store,
                              const std::string& path) {
  nlohmann::json j;
  j["schema"] = "promptkit/prompt-store/v1";
  j["method"] = store.method;
  j["generator_id"] = store.generator_id;
  j["evaluator_id"] = store.evaluator_id;
  j["seed"] = store.seed;
  j["config_digest"] = store.config_digest;
  nlohmann::json prompts = nlohmann::json::object();
  for (const auto& [rel, rec] : store.records) {
    nlohmann::json r;
    r["template"] = rec.prompt.str();
    r["train_score"] = rec.train_score;
    r["eval_score"] = rec.eval_score;
    if (!rec.soft_blob.empty()) r["soft_blob"] = rec.soft_blob;
    prompts[rel] = std::move(r);
  }
  j["prompts"] = std::move(prompts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write prompt store: " + path);
  out << j.dump(1) << '\n';
}

inline PromptStore load_prompt_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prompt store: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw DataError("prompt store is not valid JSON: " + path);
  try {
    PromptStore store;
    store.method = j.at("method").get<std::string>();
    store.generator_id = j.at("generator_id").get<std::string>();
    store.evaluator_id = j.at("evaluator_id").get<std::string>();
    store.seed = j.at("seed").get<std::uint64_t>();
    store.config_digest = j.value("config_digest", "");
    for (const auto& [rel, r] : j.at("prompts").items()) {
      PromptRecord rec;
      rec.relation_id = rel;
      rec.prompt = PromptTemplate::parse(r.at("template").get<std::string>());
      rec.train_score = r.value("train_score", 0.0);
      rec.eval_score = r.value("eval_score", 0.0);
      rec.soft_blob = r.value("soft_blob", "");
      store.records.emplace(rel, std::move(rec));
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad prompt store " + path + ": " + e.what());
  }
}

}  // namespace promptkit
