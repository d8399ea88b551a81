#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptkit/corpus.hpp"
#include "promptkit/errors.hpp"
#include "promptkit/linalg.hpp"
#include "promptkit/template.hpp"

namespace promptkit {

enum class LMKind { masked, left_to_right, seq2seq };

inline std::string to_string(LMKind kind) {
  switch (kind) {
    case LMKind::masked: return "masked";
    case LMKind::left_to_right: return "left_to_right";
    case LMKind::seq2seq: return "seq2seq";
  }
  return "unknown";
}

inline LMKind lm_kind_from_string(const std::string& s) {
  if (s == "masked") return LMKind::masked;
  if (s == "left_to_right") return LMKind::left_to_right;
  if (s == "seq2seq") return LMKind::seq2seq;
  throw ValidationError("unknown LM kind: " + s);
}

struct ModelInfo {
  std::string model_id;
  LMKind kind = LMKind::masked;
  std::size_t embedding_dim = 0;
  std::uint64_t parameter_count = 0;
};

using TokenId = std::int32_t;

// A query rendered into model-native tokens.
//   masked/seq2seq: the answer slot holds the mask/sentinel token and
//                   answer_position points at it.
//   left_to_right:  the sequence is truncated right before the answer slot
//                   and answer_position == token_ids.size() (next token).
// prompt_positions are the trigger-token positions eligible for replacement,
// in template order; they never overlap subject tokens or the answer slot.
struct RenderedQuery {
  std::vector<TokenId> token_ids;
  std::size_t answer_position = 0;
  std::vector<std::size_t> prompt_positions;
  LMKind kind = LMKind::masked;
};

// Per-position replacement of input embeddings (soft prompts, finite
// difference probes). Keys are token positions in the rendered query.
using EmbeddingOverrides = std::map<std::size_t, Vec>;

// Gradient of log p(gold at answer slot) w.r.t. the input embedding at each
// prompt position.
struct EmbeddingGradient {
  std::map<std::size_t, Vec> by_position;

  const Vec& at(std::size_t position) const {
    auto it = by_position.find(position);
    if (it == by_position.end())
      throw ValidationError("no gradient for position " +
                            std::to_string(position));
    return it->second;
  }
};

// Log-probabilities of common-vocabulary tokens at the answer slot. Entries
// are aligned with the VocabSet ordering; tokens with no single-piece
// encoding on the model are unsupported (score -inf, native id -1). The
// scores are a restriction of the model's full softmax, so exp() sums to <= 1.
class TokenDistribution {
 public:
  TokenDistribution() = default;
  TokenDistribution(std::vector<double> log_probs,
                    std::vector<TokenId> native_ids)
      : log_probs_(std::move(log_probs)), native_ids_(std::move(native_ids)) {}

  std::size_t size() const { return log_probs_.size(); }
  double score(std::size_t vocab_index) const { return log_probs_[vocab_index]; }
  TokenId native_id(std::size_t vocab_index) const {
    return native_ids_[vocab_index];
  }
  bool supported(std::size_t vocab_index) const {
    return native_ids_[vocab_index] >= 0;
  }
  const std::vector<double>& log_probs() const { return log_probs_; }

  // Highest-scoring supported token; ties go to the lowest native token id.
  std::optional<std::size_t> argmax() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < log_probs_.size(); ++i) {
      if (!supported(i)) continue;
      if (!best || log_probs_[i] > log_probs_[*best] ||
          (log_probs_[i] == log_probs_[*best] &&
           native_ids_[i] < native_ids_[*best]))
        best = i;
    }
    return best;
  }

 private:
  std::vector<double> log_probs_;
  std::vector<TokenId> native_ids_;
};

// How a tokenizer marks word-internal vs word-initial pieces. Used to project
// a model-native vocabulary onto plain surface tokens before intersection:
// word-internal pieces are excluded, word-initial markers are stripped.
enum class MarkerStyle {
  none,           // plain word-level vocabulary
  wordpiece,      // "##xyz" marks word-internal pieces
  bpe_space,      // "Ġxyz" (Ġ) marks word-initial tokens
  sentencepiece,  // "▁xyz" (▁) marks word-initial tokens
};

inline std::string to_string(MarkerStyle style) {
  switch (style) {
    case MarkerStyle::none: return "none";
    case MarkerStyle::wordpiece: return "wordpiece";
    case MarkerStyle::bpe_space: return "bpe_space";
    case MarkerStyle::sentencepiece: return "sentencepiece";
  }
  return "unknown";
}

inline MarkerStyle marker_style_from_string(const std::string& s) {
  if (s == "none") return MarkerStyle::none;
  if (s == "wordpiece") return MarkerStyle::wordpiece;
  if (s == "bpe_space") return MarkerStyle::bpe_space;
  if (s == "sentencepiece") return MarkerStyle::sentencepiece;
  throw ValidationError("unknown marker style: " + s);
}

// Surface form of a native vocabulary entry, or nullopt for word-internal
// pieces that must not enter the common vocabulary.
inline std::optional<std::string> surface_form(const std::string& native_token,
                                               MarkerStyle style) {
  static const std::string kGMark = "\xc4\xa0";   // Ġ
  static const std::string kSpMark = "\xe2\x96\x81";  // ▁
  switch (style) {
    case MarkerStyle::none:
      return native_token;
    case MarkerStyle::wordpiece:
      if (native_token.rfind("##", 0) == 0) return std::nullopt;
      return native_token;
    case MarkerStyle::bpe_space:
      if (native_token.rfind(kGMark, 0) == 0)
        return native_token.substr(kGMark.size());
      return std::nullopt;
    case MarkerStyle::sentencepiece:
      if (native_token.rfind(kSpMark, 0) == 0)
        return native_token.substr(kSpMark.size());
      return std::nullopt;
  }
  return std::nullopt;
}

// Uniform interface over masked, left-to-right and seq2seq models. Adapters
// never update model parameters; everything here is read-only inference.
//
// Concurrency: when thread_safe_reads() is true, concurrent prediction calls
// on one handle are safe; otherwise the caller must serialize per handle
// (parallelism across handles is always fine).
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const ModelInfo& info() const = 0;

  // Model-native vocabulary, index == token id.
  virtual const std::vector<std::string>& native_vocab() const = 0;

  // Surface tokens eligible for the cross-model common vocabulary:
  // word-initial single pieces with markers stripped, special tokens removed.
  virtual std::vector<std::string> surface_vocabulary() const = 0;

  // Native id of a surface token's word-initial single-piece encoding;
  // nullopt when the token would need several pieces on this model.
  virtual std::optional<TokenId> surface_token_id(
      const std::string& token) const = 0;

  // Whitespace-delimited text to native token ids. Throws AdapterError when
  // a word has no encoding.
  virtual std::vector<TokenId> tokenize(const std::string& text) const = 0;

  virtual std::optional<TokenId> mask_token_id() const = 0;
  virtual std::optional<TokenId> filler_token_id() const = 0;

  // Input-embedding matrix, one row per native token. Stable across calls.
  virtual const Matrix& input_embeddings() const = 0;

  // Raw scores over the native vocabulary at the answer slot, optionally with
  // input embeddings replaced at given positions.
  virtual Vec answer_logits(const RenderedQuery& query,
                            const EmbeddingOverrides* overrides = nullptr)
      const = 0;

  // d log p(gold) / d e_position for every prompt position of the query.
  virtual std::map<std::size_t, Vec> answer_loglik_gradient(
      const RenderedQuery& query, TokenId gold,
      const EmbeddingOverrides* overrides = nullptr) const = 0;

  virtual bool thread_safe_reads() const { return true; }
};

using LMHandlePtr = std::shared_ptr<const LanguageModel>;

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline RenderedQuery render(const LanguageModel& lm, const PromptTemplate& tpl,
                            const std::string& subject) {
  const LMKind kind = lm.info().kind;
  RenderedQuery query;
  query.kind = kind;

  bool answer_seen = false;
  for (const std::string& item : tpl.items()) {
    if (item == PromptTemplate::kSubjectSlot) {
      std::vector<TokenId> subj;
      try {
        subj = lm.tokenize(subject);
      } catch (const AdapterError& e) {
        throw AdapterError("subject \"" + subject +
                           "\" fails to tokenize: " + e.what());
      }
      if (subj.empty())
        throw AdapterError("subject \"" + subject + "\" fails to tokenize");
      query.token_ids.insert(query.token_ids.end(), subj.begin(), subj.end());
    } else if (item == PromptTemplate::kAnswerSlot) {
      answer_seen = true;
      if (kind == LMKind::left_to_right) {
        // Only tokens before the answer slot are used; the object is scored
        // as the next token.
        query.answer_position = query.token_ids.size();
        break;
      }
      const auto mask = lm.mask_token_id();
      if (!mask)
        throw AdapterError("model " + lm.info().model_id +
                           " has no mask/sentinel token");
      query.answer_position = query.token_ids.size();
      query.token_ids.push_back(*mask);
    } else {
      const std::vector<TokenId> ids = lm.tokenize(item);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        query.prompt_positions.push_back(query.token_ids.size());
        query.token_ids.push_back(ids[k]);
      }
    }
  }
  if (!answer_seen)
    throw ValidationError("template lacks an answer slot: " + tpl.str());
  return query;
}

// ---------------------------------------------------------------------------
// Prediction and gradients
// ---------------------------------------------------------------------------

// Cached mapping of a common vocabulary onto one model's native ids.
// Tokens with no single-piece encoding are excluded from that model's
// scoring support; excluded_count() is surfaced in run manifests.
class VocabIndex {
 public:
  VocabIndex(const LanguageModel& lm, const VocabSet& vocab) {
    native_ids_.reserve(vocab.size());
    for (const auto& token : vocab.tokens()) {
      const auto id = lm.surface_token_id(token);
      native_ids_.push_back(id ? *id : TokenId{-1});
      if (!id) ++excluded_;
    }
  }

  const std::vector<TokenId>& native_ids() const { return native_ids_; }
  std::size_t excluded_count() const { return excluded_; }

 private:
  std::vector<TokenId> native_ids_;
  std::size_t excluded_ = 0;
};

inline TokenDistribution predict_object_distribution(const LanguageModel& lm,
                                                     const RenderedQuery& query,
                                                     const VocabIndex& index,
                                                     const EmbeddingOverrides*
                                                         overrides = nullptr) {
  const Vec logits = lm.answer_logits(query, overrides);
  const Vec lsm = log_softmax(logits);
  std::vector<double> scores;
  scores.reserve(index.native_ids().size());
  for (TokenId id : index.native_ids())
    scores.push_back(id >= 0 ? lsm[static_cast<std::size_t>(id)]
                             : -std::numeric_limits<double>::infinity());
  return TokenDistribution(std::move(scores), index.native_ids());
}

// Log-probabilities of every common-vocabulary token at the answer slot.
inline TokenDistribution predict_object_distribution(const LanguageModel& lm,
                                                     const RenderedQuery& query,
                                                     const VocabSet& vocab) {
  return predict_object_distribution(lm, query, VocabIndex(lm, vocab));
}

// Gradient of the gold object's log-likelihood w.r.t. each trigger position's
// input embedding.
inline EmbeddingGradient input_gradient(const LanguageModel& lm,
                                        const RenderedQuery& query,
                                        const std::string& gold,
                                        const EmbeddingOverrides* overrides =
                                            nullptr) {
  if (query.prompt_positions.empty())
    throw ValidationError("input_gradient requires prompt positions");
  const auto gold_id = lm.surface_token_id(gold);
  if (!gold_id)
    throw AdapterError("gold token \"" + gold + "\" is not encodable on " +
                       lm.info().model_id);
  EmbeddingGradient grad;
  grad.by_position = lm.answer_loglik_gradient(query, *gold_id, overrides);
  for (const auto& [pos, vec] : grad.by_position)
    for (double v : vec)
      if (!std::isfinite(v))
        throw AdapterError("non-finite gradient at position " +
                           std::to_string(pos));
  return grad;
}

inline const Matrix& embedding_matrix(const LanguageModel& lm) {
  return lm.input_embeddings();
}

}  // namespace promptkit
