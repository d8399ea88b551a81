#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptkit/errors.hpp"

namespace promptkit {

// One slot-filling triple to probe: does the model recover `object` when
// queried with a prompt built around `subject`?
struct Fact {
  std::string subject;
  std::string relation_id;  // e.g. "P19"
  std::string object;       // single word, the gold answer

  friend bool operator==(const Fact&, const Fact&) = default;
  friend auto operator<=>(const Fact&, const Fact&) = default;
};

// A relation plus its hand-written template, e.g. "[X] was born in [Y]".
struct RelationSpec {
  std::string relation_id;
  std::string manual_template;
};

// Case-sensitive token set shared by a group of models. Kept sorted so every
// artifact that serializes it is reproducible.
class VocabSet {
 public:
  VocabSet() = default;

  explicit VocabSet(std::vector<std::string> tokens,
                    std::vector<std::string> source_models = {})
      : tokens_(std::move(tokens)), source_models_(std::move(source_models)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& source_models() const {
    return source_models_;
  }

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  bool contains(const std::string& token) const {
    return std::binary_search(tokens_.begin(), tokens_.end(), token);
  }

  // Index in sorted order, or nullopt.
  std::optional<std::size_t> index_of(const std::string& token) const {
    auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
    if (it == tokens_.end() || *it != token) return std::nullopt;
    return static_cast<std::size_t>(it - tokens_.begin());
  }

  const std::string& token(std::size_t index) const { return tokens_[index]; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> source_models_;
};

// Facts grouped per relation; map keeps relation iteration deterministic.
using RelationFacts = std::map<std::string, std::vector<Fact>>;

struct DatasetSplit {
  RelationFacts train;
  RelationFacts test;
};

inline std::size_t total_facts(const RelationFacts& rf) {
  std::size_t n = 0;
  for (const auto& [rel, facts] : rf) n += facts.size();
  return n;
}

// Canonical content order; duplicates are preserved. Components that sample
// batches sort first so results never depend on input file order.
inline std::vector<Fact> sorted_copy(const std::vector<Fact>& facts) {
  std::vector<Fact> out = facts;
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Fact ingestion
// ---------------------------------------------------------------------------

struct RecordError {
  std::size_t line_number = 0;  // 1-based
  std::string reason;
};

struct FactLoadResult {
  std::vector<Fact> facts;   // file order
  std::vector<RecordError> errors;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool has_whitespace(const std::string& s) {
  for (char c : s)
    if (std::isspace(static_cast<unsigned char>(c))) return true;
  return false;
}

inline std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// Reads line-delimited JSON records with `sub_label`, `obj_label` and
// (optionally) `predicate_id` fields. Malformed lines are reported in the
// result instead of being dropped silently.
inline FactLoadResult load_facts(const std::string& path,
                                 const std::string& relation_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fact file: " + path);

  FactLoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      result.errors.push_back({line_no, "not a JSON object"});
      continue;
    }
    if (!record.contains("sub_label") || !record["sub_label"].is_string()) {
      result.errors.push_back({line_no, "missing field sub_label"});
      continue;
    }
    if (!record.contains("obj_label") || !record["obj_label"].is_string()) {
      result.errors.push_back({line_no, "missing field obj_label"});
      continue;
    }
    if (record.contains("predicate_id") &&
        record["predicate_id"].is_string() &&
        record["predicate_id"].get<std::string>() != relation_id) {
      result.errors.push_back(
          {line_no, "predicate_id " + record["predicate_id"].get<std::string>() +
                        " does not match " + relation_id});
      continue;
    }
    Fact fact;
    fact.subject = detail::trim(record["sub_label"].get<std::string>());
    fact.object = detail::trim(record["obj_label"].get<std::string>());
    fact.relation_id = relation_id;
    if (fact.subject.empty()) {
      result.errors.push_back({line_no, "empty subject"});
      continue;
    }
    if (fact.object.empty()) {
      result.errors.push_back({line_no, "empty object"});
      continue;
    }
    if (detail::has_whitespace(fact.object)) {
      result.errors.push_back({line_no, "object is not a single word"});
      continue;
    }
    result.facts.push_back(std::move(fact));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Common vocabulary
// ---------------------------------------------------------------------------

// Case-sensitive intersection of the given vocabularies, sorted. Inputs are
// expected to be surface tokens already (continuation markers stripped by the
// adapters). An empty intersection means the model set is incompatible.
inline VocabSet build_common_vocab(
    const std::vector<std::vector<std::string>>& vocab_lists,
    std::vector<std::string> source_models = {}) {
  if (vocab_lists.empty())
    throw ValidationError("build_common_vocab needs at least one vocabulary");

  std::set<std::string> acc(vocab_lists[0].begin(), vocab_lists[0].end());
  for (std::size_t i = 1; i < vocab_lists.size() && !acc.empty(); ++i) {
    std::set<std::string> next(vocab_lists[i].begin(), vocab_lists[i].end());
    std::set<std::string> kept;
    for (const auto& t : acc)
      if (next.count(t)) kept.insert(t);
    acc.swap(kept);
  }
  if (acc.empty())
    throw ValidationError(
        "common vocabulary is empty: the model set is incompatible");
  return VocabSet(std::vector<std::string>(acc.begin(), acc.end()),
                  std::move(source_models));
}

// Keeps exactly the facts whose object is a common-vocabulary token.
inline std::vector<Fact> filter_facts(const std::vector<Fact>& facts,
                                      const VocabSet& vocab) {
  std::vector<Fact> kept;
  kept.reserve(facts.size());
  for (const Fact& f : facts)
    if (vocab.contains(f.object)) kept.push_back(f);
  return kept;
}

inline RelationFacts filter_facts(const RelationFacts& facts,
                                  const VocabSet& vocab) {
  RelationFacts out;
  for (const auto& [rel, fs] : facts) out[rel] = filter_facts(fs, vocab);
  return out;
}

// Drops facts whose object is a case-insensitive substring of the subject
// (the surface-form heuristic behind the harder UHN test subset). Case
// folding is ASCII-only; non-ASCII bytes compare verbatim.
inline std::vector<Fact> uhn_substring_filter(const std::vector<Fact>& facts) {
  std::vector<Fact> kept;
  kept.reserve(facts.size());
  for (const Fact& f : facts) {
    const std::string subj = detail::ascii_lower(f.subject);
    const std::string obj = detail::ascii_lower(f.object);
    if (subj.find(obj) == std::string::npos) kept.push_back(f);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Majority baseline
// ---------------------------------------------------------------------------

// Predicts each relation's most frequent training object for every test fact
// and returns micro-averaged precision@1. Ties between equally frequent
// objects go to the lexicographically smallest one.
inline double majority_baseline(const RelationFacts& train,
                                const RelationFacts& test) {
  std::map<std::string, std::string> winner;
  for (const auto& [rel, facts] : train) {
    std::map<std::string, std::size_t> counts;
    for (const Fact& f : facts) ++counts[f.object];
    std::string best;
    std::size_t best_count = 0;
    for (const auto& [obj, n] : counts) {  // sorted keys: first max wins ties
      if (n > best_count) {
        best = obj;
        best_count = n;
      }
    }
    if (best_count > 0) winner[rel] = best;
  }

  std::size_t correct = 0, total = 0;
  for (const auto& [rel, facts] : test) {
    if (facts.empty()) continue;
    auto it = winner.find(rel);
    if (it == winner.end())
      throw ValidationError("relation " + rel + " absent from training data");
    for (const Fact& f : facts) {
      ++total;
      if (f.object == it->second) ++correct;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

// Vocabulary file: one UTF-8 token per line, sorted.
inline void save_vocab(const VocabSet& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file: " + path);
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

inline VocabSet load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return VocabSet(std::move(tokens));
}

// Relations file: tab-separated `relation_id<TAB>manual template`. Each
// template must carry exactly one [X] and one [Y].
inline std::vector<RelationSpec> load_relations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open relations file: " + path);
  std::vector<RelationSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected relation_id<TAB>template");
    RelationSpec spec{detail::trim(line.substr(0, tab)),
                      detail::trim(line.substr(tab + 1))};
    const auto count = [&](const char* slot) {
      std::size_t n = 0;
      for (auto at = spec.manual_template.find(slot); at != std::string::npos;
           at = spec.manual_template.find(slot, at + 1))
        ++n;
      return n;
    };
    if (count("[X]") != 1 || count("[Y]") != 1)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": template needs exactly one [X] and one [Y]");
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace promptkit
