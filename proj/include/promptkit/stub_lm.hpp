#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptkit/lm.hpp"

namespace promptkit {

// How a stub pools input embeddings before the linear output head.
//   mean_context:    mean over all context tokens (bag-of-tokens scorer).
//   mean_non_prompt: mean over context tokens excluding trigger positions
//                    (the model ignores trigger tokens entirely).
//   first_non_prompt: embedding of the first non-trigger context token
//                    (keyed to the subject's first token).
//   last_prompt:     embedding of the last trigger position only.
enum class StubPooling { mean_context, mean_non_prompt, first_non_prompt,
                         last_prompt };

inline std::string to_string(StubPooling p) {
  switch (p) {
    case StubPooling::mean_context: return "mean_context";
    case StubPooling::mean_non_prompt: return "mean_non_prompt";
    case StubPooling::first_non_prompt: return "first_non_prompt";
    case StubPooling::last_prompt: return "last_prompt";
  }
  return "unknown";
}

inline StubPooling stub_pooling_from_string(const std::string& s) {
  if (s == "mean_context") return StubPooling::mean_context;
  if (s == "mean_non_prompt") return StubPooling::mean_non_prompt;
  if (s == "first_non_prompt") return StubPooling::first_non_prompt;
  if (s == "last_prompt") return StubPooling::last_prompt;
  throw ValidationError("unknown stub pooling: " + s);
}

// Deterministic linear language model for tests and demos:
//
//   logits = output_weights · pool(input embeddings)
//
// Tokenization is word-level over an explicit vocabulary. Every quantity has
// a closed form, which is what makes the search and gradient oracles exact.
struct StubSpec {
  std::string model_id;
  LMKind kind = LMKind::masked;
  StubPooling pooling = StubPooling::mean_context;
  MarkerStyle marker_style = MarkerStyle::none;
  std::uint64_t parameter_count = 0;  // 0: derived from matrix sizes
  std::vector<std::string> vocab;
  std::string mask_token;    // empty: model has no mask/sentinel
  std::string filler_token;  // empty: model has no neutral filler
  Matrix embeddings;         // V x d
  Matrix output_weights;     // V x d
};

class StubLM final : public LanguageModel {
 public:
  explicit StubLM(StubSpec spec) : spec_(std::move(spec)) {
    const std::size_t v = spec_.vocab.size();
    if (spec_.embeddings.rows() != v || spec_.output_weights.rows() != v)
      throw ValidationError("stub matrices must have one row per vocab token");
    if (spec_.embeddings.cols() != spec_.output_weights.cols())
      throw ValidationError("stub embedding/output width mismatch");
    for (std::size_t i = 0; i < v; ++i) {
      if (!by_token_.emplace(spec_.vocab[i], static_cast<TokenId>(i)).second)
        throw ValidationError("duplicate stub vocab token: " + spec_.vocab[i]);
    }
    mask_id_ = lookup_special(spec_.mask_token);
    filler_id_ = lookup_special(spec_.filler_token);
    info_.model_id = spec_.model_id;
    info_.kind = spec_.kind;
    info_.embedding_dim = spec_.embeddings.cols();
    info_.parameter_count =
        spec_.parameter_count
            ? spec_.parameter_count
            : static_cast<std::uint64_t>(2 * v * spec_.embeddings.cols());
  }

  const ModelInfo& info() const override { return info_; }
  const std::vector<std::string>& native_vocab() const override {
    return spec_.vocab;
  }

  std::vector<std::string> surface_vocabulary() const override {
    std::vector<std::string> out;
    std::unordered_map<std::string, bool> seen;
    for (std::size_t i = 0; i < spec_.vocab.size(); ++i) {
      if (is_special(static_cast<TokenId>(i))) continue;
      const auto surface = surface_form(spec_.vocab[i], spec_.marker_style);
      if (surface && seen.emplace(*surface, true).second)
        out.push_back(*surface);
    }
    return out;
  }

  std::optional<TokenId> surface_token_id(
      const std::string& token) const override {
    std::string native = token;
    switch (spec_.marker_style) {
      case MarkerStyle::none:
        break;
      case MarkerStyle::wordpiece:
        if (token.rfind("##", 0) == 0) return std::nullopt;  // word-internal
        break;
      case MarkerStyle::bpe_space:
        native = "\xc4\xa0" + token;
        break;
      case MarkerStyle::sentencepiece:
        native = "\xe2\x96\x81" + token;
        break;
    }
    const auto it = by_token_.find(native);
    if (it == by_token_.end() || is_special(it->second)) return std::nullopt;
    return it->second;
  }

  std::vector<TokenId> tokenize(const std::string& text) const override {
    std::vector<TokenId> ids;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
      if (auto id = surface_token_id(word)) {
        ids.push_back(*id);
        continue;
      }
      const auto exact = by_token_.find(word);  // specials, punctuation
      if (exact != by_token_.end()) {
        ids.push_back(exact->second);
        continue;
      }
      throw AdapterError("token \"" + word + "\" has no encoding on " +
                         spec_.model_id);
    }
    return ids;
  }

  std::optional<TokenId> mask_token_id() const override { return mask_id_; }
  std::optional<TokenId> filler_token_id() const override { return filler_id_; }

  const Matrix& input_embeddings() const override { return spec_.embeddings; }

  Vec answer_logits(const RenderedQuery& query,
                    const EmbeddingOverrides* overrides) const override {
    const auto weights = pooling_weights(query);
    const Vec pooled = pool(query, weights, overrides);
    return spec_.output_weights.matvec(pooled);
  }

  std::map<std::size_t, Vec> answer_loglik_gradient(
      const RenderedQuery& query, TokenId gold,
      const EmbeddingOverrides* overrides) const override {
    if (gold < 0 || static_cast<std::size_t>(gold) >= spec_.vocab.size())
      throw AdapterError("gold token id out of range");
    const auto weights = pooling_weights(query);
    const Vec pooled = pool(query, weights, overrides);
    const Vec logits = spec_.output_weights.matvec(pooled);
    const Vec lsm = log_softmax(logits);
    Vec residual(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j)
      residual[j] = (static_cast<TokenId>(j) == gold ? 1.0 : 0.0) -
                    std::exp(lsm[j]);
    const Vec base = spec_.output_weights.matvec_transposed(residual);

    std::map<std::size_t, Vec> grad;
    for (std::size_t pos : query.prompt_positions) {
      const auto w = weights.find(pos);
      const double alpha = w == weights.end() ? 0.0 : w->second;
      Vec g = base;
      scale(g, alpha);
      grad[pos] = std::move(g);
    }
    return grad;
  }

  const StubSpec& spec() const { return spec_; }

 private:
  bool is_special(TokenId id) const {
    return (mask_id_ && *mask_id_ == id) || (filler_id_ && *filler_id_ == id);
  }

  std::optional<TokenId> lookup_special(const std::string& token) const {
    if (token.empty()) return std::nullopt;
    const auto it = by_token_.find(token);
    if (it == by_token_.end())
      throw ValidationError("special token \"" + token +
                            "\" missing from stub vocab");
    return it->second;
  }

  // Pooling weight per context position; positions not in the map weigh 0.
  std::map<std::size_t, double> pooling_weights(
      const RenderedQuery& query) const {
    std::vector<std::size_t> context;
    for (std::size_t i = 0; i < query.token_ids.size(); ++i) {
      if (query.kind == LMKind::left_to_right) {
        if (i >= query.answer_position) break;
      } else if (i == query.answer_position) {
        continue;
      }
      context.push_back(i);
    }
    const auto is_prompt = [&](std::size_t i) {
      for (std::size_t p : query.prompt_positions)
        if (p == i) return true;
      return false;
    };

    std::map<std::size_t, double> weights;
    switch (spec_.pooling) {
      case StubPooling::mean_context: {
        for (std::size_t i : context)
          weights[i] = 1.0 / static_cast<double>(context.size());
        break;
      }
      case StubPooling::mean_non_prompt: {
        std::vector<std::size_t> kept;
        for (std::size_t i : context)
          if (!is_prompt(i)) kept.push_back(i);
        for (std::size_t i : kept)
          weights[i] = 1.0 / static_cast<double>(kept.size());
        break;
      }
      case StubPooling::first_non_prompt: {
        for (std::size_t i : context) {
          if (!is_prompt(i)) {
            weights[i] = 1.0;
            break;
          }
        }
        break;
      }
      case StubPooling::last_prompt: {
        std::optional<std::size_t> last;
        for (std::size_t i : context)
          if (is_prompt(i)) last = i;
        if (last) weights[*last] = 1.0;
        break;
      }
    }
    return weights;
  }

  Vec pool(const RenderedQuery& query,
           const std::map<std::size_t, double>& weights,
           const EmbeddingOverrides* overrides) const {
    Vec pooled(info_.embedding_dim, 0.0);
    for (const auto& [pos, alpha] : weights) {
      const Vec* vec = nullptr;
      Vec row;
      if (overrides) {
        const auto ov = overrides->find(pos);
        if (ov != overrides->end()) {
          if (ov->second.size() != info_.embedding_dim)
            throw AdapterError("embedding override width mismatch");
          vec = &ov->second;
        }
      }
      if (!vec) {
        const TokenId id = query.token_ids[pos];
        if (id < 0 || static_cast<std::size_t>(id) >= spec_.vocab.size())
          throw AdapterError("token id out of range in query");
        row = spec_.embeddings.row_vec(static_cast<std::size_t>(id));
        vec = &row;
      }
      axpy(alpha, *vec, pooled);
    }
    return pooled;
  }

  StubSpec spec_;
  ModelInfo info_;
  std::unordered_map<std::string, TokenId> by_token_;
  std::optional<TokenId> mask_id_;
  std::optional<TokenId> filler_id_;
};

// ---------------------------------------------------------------------------
// Stub matrix-file format (JSON)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty())
    throw DataError("matrix must be a non-empty array of rows");
  const std::size_t cols = rows[0].size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw DataError("ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline void save_stub_spec(const StubSpec& spec, const std::string& path) {
  nlohmann::json j;
  j["schema"] = "promptkit/stub-lm/v1";
  j["model_id"] = spec.model_id;
  j["kind"] = to_string(spec.kind);
  j["pooling"] = to_string(spec.pooling);
  j["marker_style"] = to_string(spec.marker_style);
  j["parameter_count"] = spec.parameter_count;
  j["vocab"] = spec.vocab;
  j["mask_token"] = spec.mask_token;
  j["filler_token"] = spec.filler_token;
  j["embeddings"] = detail::matrix_to_json(spec.embeddings);
  j["output_weights"] = detail::matrix_to_json(spec.output_weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write stub model file: " + path);
  out << j.dump(1) << '\n';
}

inline StubSpec load_stub_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stub model file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw DataError("stub model file is not valid JSON: " + path);
  try {
    StubSpec spec;
    spec.model_id = j.at("model_id").get<std::string>();
    spec.kind = lm_kind_from_string(j.at("kind").get<std::string>());
    spec.pooling = stub_pooling_from_string(j.at("pooling").get<std::string>());
    spec.marker_style =
        marker_style_from_string(j.value("marker_style", "none"));
    spec.parameter_count = j.value("parameter_count", std::uint64_t{0});
    spec.vocab = j.at("vocab").get<std::vector<std::string>>();
    spec.mask_token = j.value("mask_token", "");
    spec.filler_token = j.value("filler_token", "");
    spec.embeddings = detail::matrix_from_json(j.at("embeddings"));
    spec.output_weights = detail::matrix_from_json(j.at("output_weights"));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad stub model file " + path + ": " + e.what());
  }
}

inline std::shared_ptr<const StubLM> load_stub_model(const std::string& path) {
  return std::make_shared<const StubLM>(load_stub_spec(path));
}

}  // namespace promptkit
