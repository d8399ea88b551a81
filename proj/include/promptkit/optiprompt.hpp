#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "promptkit/autoprompt.hpp"
#include "promptkit/corpus.hpp"
#include "promptkit/lm.hpp"
#include "promptkit/rng.hpp"

namespace promptkit {

enum class SoftInit { random, vocab_sample, manual_template };

inline std::string to_string(SoftInit init) {
  switch (init) {
    case SoftInit::random: return "random";
    case SoftInit::vocab_sample: return "vocab_sample";
    case SoftInit::manual_template: return "manual_template";
  }
  return "unknown";
}

inline SoftInit soft_init_from_string(const std::string& s) {
  if (s == "random") return SoftInit::random;
  if (s == "vocab_sample") return SoftInit::vocab_sample;
  if (s == "manual_template") return SoftInit::manual_template;
  throw ValidationError("unknown soft prompt init mode: " + s);
}

// A prompt made of free vectors in the source model's embedding space,
// injected at the trigger positions of "[X] v1 .. vL [Y]".
struct SoftPrompt {
  std::string relation_id;
  std::vector<Vec> vectors;  // L rows, each embedding_dim wide
  std::string source_model_id;
  SoftInit init_mode = SoftInit::random;
  std::uint64_t seed = 0;

  std::size_t length() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors[0].size(); }
};

struct SoftTrainConfig {
  std::optional<double> learning_rate;  // unset: 3e-3, or 3e-2 for T5 models
  std::size_t epochs = 20;
  std::size_t length = 5;
  std::size_t batch_size = 16;  // 0 = full batch
  std::uint64_t seed = 0;
  SoftInit init = SoftInit::random;
  std::string manual_template;  // required for manual_template init
};

// The T5 family needs a larger step size to converge; everyone else uses the
// stock rate.
inline double resolve_soft_lr(const SoftTrainConfig& cfg,
                              const std::string& model_id) {
  if (cfg.learning_rate) return *cfg.learning_rate;
  std::string lower = model_id;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.find("t5") != std::string::npos ? 3e-2 : 3e-3;
}

namespace detail_soft {

// Trigger placeholders only carry positions; their embeddings get overridden.
inline std::string placeholder_token(const LanguageModel& lm) {
  if (const auto id = lm.filler_token_id())
    return lm.native_vocab()[static_cast<std::size_t>(*id)];
  if (const auto id = lm.mask_token_id())
    return lm.native_vocab()[static_cast<std::size_t>(*id)];
  return lm.native_vocab().front();
}

inline PromptTemplate placeholder_template(const LanguageModel& lm,
                                           std::size_t length) {
  std::vector<std::string> items;
  items.push_back(PromptTemplate::kSubjectSlot);
  const std::string filler = placeholder_token(lm);
  for (std::size_t i = 0; i < length; ++i) items.push_back(filler);
  items.push_back(PromptTemplate::kAnswerSlot);
  return PromptTemplate(std::move(items));
}

inline EmbeddingOverrides overrides_for(const RenderedQuery& query,
                                        const std::vector<Vec>& vectors) {
  if (query.prompt_positions.size() != vectors.size())
    throw ValidationError("soft prompt length does not match rendered query");
  EmbeddingOverrides ov;
  for (std::size_t i = 0; i < vectors.size(); ++i)
    ov[query.prompt_positions[i]] = vectors[i];
  return ov;
}

}  // namespace detail_soft

struct SoftTrainResult {
  SoftPrompt prompt;
  std::vector<double> epoch_losses;  // index 0: loss at initialization
  double learning_rate = 0.0;
};

// Plain SGD on the negative log-likelihood of the gold objects. Facts are
// sorted first so training order never depends on input order; batches and
// initialization draw from seeded substreams.
inline SoftTrainResult train_soft(const LanguageModel& lm,
                                  const std::string& relation_id,
                                  const std::vector<Fact>& train,
                                  const SoftTrainConfig& cfg) {
  if (train.empty()) throw ValidationError("train_soft requires facts");
  if (cfg.length == 0) throw ValidationError("soft prompt length must be > 0");

  std::vector<Fact> facts;
  for (const Fact& f : sorted_copy(train)) {
    if (!lm.surface_token_id(f.object)) continue;
    try {
      (void)lm.tokenize(f.subject);
    } catch (const AdapterError&) {
      continue;
    }
    facts.push_back(f);
  }
  if (facts.empty())
    throw ValidationError("no training fact is scorable on " +
                          lm.info().model_id);

  const std::size_t dim = lm.info().embedding_dim;
  const double lr = resolve_soft_lr(cfg, lm.info().model_id);

  SoftPrompt prompt;
  prompt.relation_id = relation_id;
  prompt.source_model_id = lm.info().model_id;
  prompt.init_mode = cfg.init;
  prompt.seed = cfg.seed;
  prompt.vectors.assign(cfg.length, Vec(dim, 0.0));

  auto init_rng = substream(cfg.seed, "opti.init");
  switch (cfg.init) {
    case SoftInit::random:
      for (auto& v : prompt.vectors)
        for (double& x : v) x = gaussian(init_rng);
      break;
    case SoftInit::vocab_sample: {
      const Matrix& emb = lm.input_embeddings();
      for (auto& v : prompt.vectors)
        v = emb.row_vec(uniform_index(init_rng, emb.rows()));
      break;
    }
    case SoftInit::manual_template: {
      if (cfg.manual_template.empty())
        throw ValidationError("manual_template init needs a template");
      const PromptTemplate tpl = PromptTemplate::parse(cfg.manual_template);
      std::vector<TokenId> ids;
      for (const auto& item : tpl.trigger_items()) {
        const auto word_ids = lm.tokenize(item);
        ids.insert(ids.end(), word_ids.begin(), word_ids.end());
      }
      if (ids.size() < cfg.length)
        throw ValidationError("manual template has fewer than L tokens");
      const Matrix& emb = lm.input_embeddings();
      for (std::size_t i = 0; i < cfg.length; ++i)
        prompt.vectors[i] = emb.row_vec(static_cast<std::size_t>(ids[i]));
      break;
    }
  }

  const PromptTemplate tpl = detail_soft::placeholder_template(lm, cfg.length);
  std::vector<RenderedQuery> queries;
  queries.reserve(facts.size());
  for (const Fact& f : facts) queries.push_back(render(lm, tpl, f.subject));

  const auto full_loss = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < facts.size(); ++i) {
      const auto ov = detail_soft::overrides_for(queries[i], prompt.vectors);
      total -= gold_log_prob(lm, queries[i], facts[i].object, &ov);
    }
    return total / static_cast<double>(facts.size());
  };

  SoftTrainResult result;
  result.learning_rate = lr;
  result.epoch_losses.push_back(full_loss());

  const std::size_t batch =
      cfg.batch_size == 0 ? facts.size() : std::min(cfg.batch_size, facts.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order_rng = substream(cfg.seed, "opti.order", epoch);
    std::vector<std::size_t> order(facts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (cfg.batch_size != 0) shuffle_in_place(order, order_rng);

    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<Vec> grad(cfg.length, Vec(dim, 0.0));
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        const auto ov = detail_soft::overrides_for(queries[i], prompt.vectors);
        const EmbeddingGradient g =
            input_gradient(lm, queries[i], facts[i].object, &ov);
        for (std::size_t t = 0; t < cfg.length; ++t)
          axpy(1.0, g.at(queries[i].prompt_positions[t]), grad[t]);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t t = 0; t < cfg.length; ++t)
        axpy(lr * inv, grad[t], prompt.vectors[t]);  // ascent on log p
    }

    const double loss = full_loss();
    if (!std::isfinite(loss))
      throw AdapterError("soft prompt training diverged at epoch " +
                         std::to_string(epoch + 1));
    result.epoch_losses.push_back(loss);
  }

  result.prompt = std::move(prompt);
  return result;
}

// ---------------------------------------------------------------------------
// Cross-model transfer
// ---------------------------------------------------------------------------

// Evaluates a soft prompt on a target model by injecting its vectors at the
// trigger positions. Construction fails with DimensionMismatchError when the
// embedding widths differ; that mismatch is the expected failure mode of
// direct soft-prompt transfer, not a defect.
class SoftPromptProvider {
 public:
  SoftPromptProvider(SoftPrompt prompt, const LanguageModel& target)
      : prompt_(std::move(prompt)), target_(target) {
    if (prompt_.dim() != target_.info().embedding_dim)
      throw DimensionMismatchError(prompt_.dim(), target_.info().embedding_dim);
    template_ = detail_soft::placeholder_template(target_, prompt_.length());
  }

  const LanguageModel& target() const { return target_; }
  const SoftPrompt& prompt() const { return prompt_; }

  RenderedQuery render_query(const std::string& subject) const {
    return render(target_, template_, subject);
  }

  TokenDistribution distribution(const std::string& subject,
                                 const VocabIndex& index) const {
    const RenderedQuery query = render_query(subject);
    const auto ov = detail_soft::overrides_for(query, prompt_.vectors);
    return predict_object_distribution(target_, query, index, &ov);
  }

  double gold_log_likelihood(const Fact& fact) const {
    const RenderedQuery query = render_query(fact.subject);
    const auto ov = detail_soft::overrides_for(query, prompt_.vectors);
    return gold_log_prob(target_, query, fact.object, &ov);
  }

 private:
  SoftPrompt prompt_;
  const LanguageModel& target_;
  PromptTemplate template_;
};

inline SoftPromptProvider transfer_soft(const SoftPrompt& prompt,
                                        const LanguageModel& target) {
  return SoftPromptProvider(prompt, target);
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

enum class NeighborMetric { cosine, euclidean };

// Maps each soft vector to its nearest vocabulary embedding, ties to the
// lower token id. Cosine is the default; rows with zero norm can never win
// under cosine. A zero-norm prompt vector has no cosine neighbor and is an
// error, reported with its position.
inline DiscretePrompt discretize(const SoftPrompt& prompt, const Matrix& emb,
                                 const std::vector<std::string>& token_names,
                                 NeighborMetric metric = NeighborMetric::cosine) {
  if (emb.rows() != token_names.size())
    throw ValidationError("token name list does not match embedding rows");
  if (emb.cols() != prompt.dim())
    throw ValidationError("embedding width does not match soft prompt");

  DiscretePrompt out;
  out.relation_id = prompt.relation_id;
  out.provenance = {prompt.source_model_id, prompt.source_model_id,
                    prompt.seed, 0};

  for (std::size_t p = 0; p < prompt.length(); ++p) {
    const Vec& v = prompt.vectors[p];
    if (metric == NeighborMetric::cosine && norm2(v) == 0.0)
      throw ValidationError("soft prompt vector " + std::to_string(p) +
                            " has zero norm; cosine neighbor undefined");
    std::optional<std::size_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < emb.rows(); ++r) {
      double score;
      if (metric == NeighborMetric::cosine) {
        double rn = 0.0;
        for (std::size_t c = 0; c < emb.cols(); ++c)
          rn += emb(r, c) * emb(r, c);
        if (rn == 0.0) continue;
        score = cosine_to_row(v, emb, r);
      } else {
        score = -squared_distance_to_row(v, emb, r);
      }
      if (!best || score > best_score) {
        best = r;
        best_score = score;
      }
    }
    if (!best)
      throw ValidationError("no vocabulary row has a defined similarity");
    out.trigger_tokens.push_back(token_names[*best]);
  }
  return out;
}

// Neighbors restricted to surface-eligible tokens, so the discretized prompt
// renders as an ordinary discrete prompt.
inline DiscretePrompt discretize(const SoftPrompt& prompt,
                                 const LanguageModel& lm,
                                 NeighborMetric metric = NeighborMetric::cosine) {
  const std::vector<std::string> names = lm.surface_vocabulary();
  const Matrix& emb = lm.input_embeddings();
  Matrix rows(names.size(), emb.cols());
  for (std::size_t r = 0; r < names.size(); ++r) {
    const auto id = lm.surface_token_id(names[r]);
    if (!id)
      throw AdapterError("surface token lost its encoding: " + names[r]);
    rows.set_row(r, emb.row_vec(static_cast<std::size_t>(*id)));
  }
  return discretize(prompt, rows, names, metric);
}

// ---------------------------------------------------------------------------
// Binary blob persistence
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "soft prompt blobs assume a little-endian host");

inline void save_soft_prompt(const SoftPrompt& prompt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write soft prompt blob: " + path);
  const char magic[8] = {'P', 'K', 'S', 'O', 'F', 'T', '0', '1'};
  out.write(magic, 8);
  const auto write_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  const auto write_u64 = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  const auto write_str = [&](const std::string& s) {
    write_u32(static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  write_u32(static_cast<std::uint32_t>(prompt.dim()));
  write_u32(static_cast<std::uint32_t>(prompt.length()));
  write_u32(static_cast<std::uint32_t>(prompt.init_mode));
  write_u64(prompt.seed);
  write_str(prompt.relation_id);
  write_str(prompt.source_model_id);
  for (const Vec& v : prompt.vectors)
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) throw DataError("failed writing soft prompt blob: " + path);
}

inline SoftPrompt load_soft_prompt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open soft prompt blob: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "PKSOFT01")
    throw DataError("not a soft prompt blob: " + path);
  const auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const auto read_str = [&]() {
    const std::uint32_t n = read_u32();
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
  };
  SoftPrompt prompt;
  const std::uint32_t dim = read_u32();
  const std::uint32_t length = read_u32();
  prompt.init_mode = static_cast<SoftInit>(read_u32());
  prompt.seed = read_u64();
  prompt.relation_id = read_str();
  prompt.source_model_id = read_str();
  prompt.vectors.assign(length, Vec(dim, 0.0));
  for (Vec& v : prompt.vectors)
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw DataError("truncated soft prompt blob: " + path);
  return prompt;
}

}  // namespace promptkit
