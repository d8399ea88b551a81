#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "promptkit/corpus.hpp"
#include "promptkit/eval.hpp"
#include "promptkit/lm.hpp"
#include "promptkit/rng.hpp"
#include "promptkit/stats.hpp"

namespace promptkit {

// Per-prompt-set property probes: semantic overlap with the manual prompts,
// word-likeness, order sensitivity under shuffling, and information
// distribution under single-token deletion.
struct ShuffleStats {
  double baseline_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_ratio = 0.0;  // percent of baseline accuracy
  double std_ratio = 0.0;
  std::size_t repeats = 0;
  std::vector<double> accuracies;  // one per repeat, in repeat order
};

struct DeletionSweep {
  std::vector<double> per_position;  // accuracy with trigger p removed
  double full_sequence = 0.0;
};

struct AnalysisReport {
  std::string prompt_set_id;
  double overlap_tscore = 0.0;
  double real_word_ratio = 0.0;  // percent
  ShuffleStats shuffle;
  DeletionSweep deletion;
};

// ---------------------------------------------------------------------------
// Semantic overlap
// ---------------------------------------------------------------------------

// Sequence embedder over raw prompt text. Injected so the probe stays
// independent of every model under study; any subword/n-gram sentence
// embedder qualifies.
using SequenceEmbedder = std::function<Vec(const std::string&)>;

// Deterministic bag-of-character-n-grams embedder with hashed buckets; a
// vocabulary- and tokenizer-independent stand-in for fastText-style
// representations.
struct NgramEmbedder {
  std::size_t n = 3;
  std::size_t dim = 256;

  Vec operator()(const std::string& text) const {
    Vec v(dim, 0.0);
    const std::string padded = "^" + text + "$";
    if (padded.size() < n) {
      v[fnv1a64(padded) % dim] += 1.0;
      return v;
    }
    for (std::size_t i = 0; i + n <= padded.size(); ++i)
      v[fnv1a64(std::string_view(padded).substr(i, n)) % dim] += 1.0;
    return v;
  }
};

namespace detail_analysis {

inline std::string content_text(const PromptTemplate& tpl) {
  std::string out;
  for (const auto& item : tpl.trigger_items()) {
    if (!out.empty()) out += ' ';
    out += item;
  }
  return out;
}

inline double checked_cosine(const Vec& a, const Vec& b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("zero-norm embedding in semantic overlap probe");
  return dot(a, b) / (na * nb);
}

}  // namespace detail_analysis

// Welch t statistic for matched-relation minus mismatched-relation cosine
// overlap between a prompt set and the manual templates. Matched pairs are
// the R same-relation comparisons; mismatched pairs are all R(R-1) ordered
// cross-relation comparisons. Positive t means the prompts resemble their
// own relation's manual phrasing more than other relations'.
inline double semantic_overlap_tscore(
    const std::map<std::string, PromptTemplate>& prompts,
    const std::map<std::string, PromptTemplate>& manual,
    const SequenceEmbedder& embedder) {
  if (prompts.size() < 2)
    throw ValidationError("semantic overlap needs at least 2 relations");
  std::map<std::string, Vec> prompt_vecs, manual_vecs;
  for (const auto& [rel, tpl] : prompts) {
    const auto it = manual.find(rel);
    if (it == manual.end())
      throw ValidationError("no manual template for relation " + rel);
    prompt_vecs[rel] = embedder(detail_analysis::content_text(tpl));
    manual_vecs[rel] = embedder(detail_analysis::content_text(it->second));
  }

  std::vector<double> matched, mismatched;
  for (const auto& [rel, pv] : prompt_vecs) {
    for (const auto& [other, mv] : manual_vecs) {
      const double c = detail_analysis::checked_cosine(pv, mv);
      (rel == other ? matched : mismatched).push_back(c);
    }
  }
  return welch_t(matched, mismatched);
}

// ---------------------------------------------------------------------------
// Real-word ratio
// ---------------------------------------------------------------------------

// Attested-word list: `token [frequency]` per line; entries below the
// frequency threshold are dropped, entries without a frequency always count.
// Lookup is case-insensitive, so tokens are folded on load.
inline std::set<std::string> load_wordlist(const std::string& path,
                                           std::uint64_t min_frequency) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open wordlist: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::uint64_t freq = 0;
    if (fields >> freq && freq < min_frequency) continue;
    words.insert(detail::ascii_lower(token));
  }
  return words;
}

namespace detail_analysis {

// Unicode-aware enough for prompt text: ASCII punctuation plus the general
// punctuation block and common Latin-1 marks act as delimiters.
inline bool is_punct_codepoint(char32_t cp) {
  if (cp < 128) return std::ispunct(static_cast<int>(cp)) != 0;
  if (cp >= 0x2000 && cp <= 0x206F) return true;  // general punctuation
  if (cp == 0x00A1 || cp == 0x00BF || cp == 0x00AB || cp == 0x00BB)
    return true;
  return false;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    char32_t cp = b;
    if (b >= 0xF0) len = 4;
    else if (b >= 0xE0) len = 3;
    else if (b >= 0xC0) len = 2;
    if (len > 1 && i + len <= text.size()) {
      cp = b & (0xFF >> (len + 1));
      for (std::size_t k = 1; k < len; ++k)
        cp = (cp << 6) | (static_cast<unsigned char>(text[i + k]) & 0x3F);
    }
    const bool delim = (cp < 128 && std::isspace(static_cast<int>(cp))) ||
                       is_punct_codepoint(cp);
    if (delim) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.append(text, i, len);
    }
    i += len;
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

inline bool all_digits(const std::string& word) {
  for (char c : word)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return !word.empty();
}

}  // namespace detail_analysis

// Percentage of space-/punctuation-delimited prompt tokens attested in the
// wordlist. Slot markers are excluded before splitting; purely numeric
// tokens count as non-words. Duplicate templates weigh proportionally.
inline double real_word_ratio(const std::vector<PromptTemplate>& prompts,
                              const std::set<std::string>& wordlist) {
  if (wordlist.empty()) throw ValidationError("wordlist is empty");
  std::size_t attested = 0, total = 0;
  for (const auto& tpl : prompts) {
    for (const auto& item : tpl.trigger_items()) {
      for (const auto& word : detail_analysis::split_words(item)) {
        ++total;
        if (detail_analysis::all_digits(word)) continue;
        if (wordlist.count(detail::ascii_lower(word))) ++attested;
      }
    }
  }
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(attested) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Shuffling
// ---------------------------------------------------------------------------

// Accuracy after independently permuting each prompt's trigger tokens, with
// the subject and answer slots pinned. Repeats use per-index substreams, so
// raising n_repeats only appends new repeats to the same sequence.
inline ShuffleStats shuffle_accuracy(
    const LanguageModel& lm, const std::map<std::string, PromptTemplate>&
        prompts,
    const RelationFacts& test, const VocabSet& vocab, std::size_t n_repeats,
    std::uint64_t seed) {
  if (n_repeats == 0) throw ValidationError("n_repeats must be positive");

  ShuffleStats stats;
  stats.repeats = n_repeats;
  stats.baseline_accuracy =
      precision_at_1(lm, prompts, test, vocab).micro_average;

  std::vector<double> accs, ratios;
  for (std::size_t r = 0; r < n_repeats; ++r) {
    auto rng = substream(seed, "analysis.shuffle", r);
    std::map<std::string, PromptTemplate> shuffled;
    for (const auto& [rel, tpl] : prompts) {
      std::vector<std::string> triggers = tpl.trigger_items();
      shuffle_in_place(triggers, rng);
      shuffled.emplace(rel, tpl.with_triggers(triggers));
    }
    const double acc =
        precision_at_1(lm, shuffled, test, vocab).micro_average;
    accs.push_back(acc);
    ratios.push_back(stats.baseline_accuracy > 0.0
                         ? 100.0 * acc / stats.baseline_accuracy
                         : 0.0);
  }

  stats.mean_accuracy = mean(accs);
  stats.std_accuracy = sample_stddev(accs);
  stats.mean_ratio = mean(ratios);
  stats.std_ratio = sample_stddev(ratios);
  stats.accuracies = std::move(accs);
  return stats;
}

// ---------------------------------------------------------------------------
// Token deletion
// ---------------------------------------------------------------------------

// Accuracy with the p-th trigger removed from every prompt, swept over all
// positions. The prompt set must have a uniform trigger count.
inline DeletionSweep token_deletion_sweep(
    const LanguageModel& lm, const std::map<std::string, PromptTemplate>&
        prompts,
    const RelationFacts& test, const VocabSet& vocab) {
  if (prompts.empty()) throw ValidationError("no prompts to sweep");
  const std::size_t length = prompts.begin()->second.trigger_count();
  if (length == 0)
    throw ValidationError("deletion sweep needs at least one trigger token");
  for (const auto& [rel, tpl] : prompts)
    if (tpl.trigger_count() != length)
      throw ValidationError(
          "deletion sweep requires a uniform trigger count; relation " + rel +
          " differs");

  DeletionSweep sweep;
  sweep.full_sequence = precision_at_1(lm, prompts, test, vocab).micro_average;
  for (std::size_t p = 0; p < length; ++p) {
    std::map<std::string, PromptTemplate> reduced;
    for (const auto& [rel, tpl] : prompts)
      reduced.emplace(rel, tpl.without_trigger(p));
    sweep.per_position.push_back(
        precision_at_1(lm, reduced, test, vocab).micro_average);
  }
  return sweep;
}

}  // namespace promptkit
