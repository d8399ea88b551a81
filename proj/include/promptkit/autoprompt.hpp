#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "promptkit/corpus.hpp"
#include "promptkit/lm.hpp"
#include "promptkit/rng.hpp"

namespace promptkit {

// A fixed-length discrete prompt: the subject slot, L trigger tokens, then
// the answer slot last (so masked and seq2seq models see the mask at the
// end, and left-to-right models keep every trigger in context).
struct DiscretePrompt {
  std::string relation_id;
  std::vector<std::string> trigger_tokens;

  struct Provenance {
    std::string generator_id;
    std::string evaluator_id;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
  } provenance;

  PromptTemplate to_template() const {
    std::vector<std::string> items;
    items.reserve(trigger_tokens.size() + 2);
    items.push_back(PromptTemplate::kSubjectSlot);
    for (const auto& t : trigger_tokens) items.push_back(t);
    items.push_back(PromptTemplate::kAnswerSlot);
    return PromptTemplate(std::move(items));
  }

  friend bool operator==(const DiscretePrompt&, const DiscretePrompt&) = default;
};

enum class SearchVocabMode { common, model_native };
enum class TriggerInit { filler, random };

struct SearchConfig {
  std::size_t num_tokens = 5;
  std::size_t iterations = 1000;
  std::size_t candidates_per_step = 10;
  std::size_t batch_size_generate = 16;
  std::size_t batch_size_evaluate = 16;
  std::uint64_t seed = 0;
  SearchVocabMode search_vocab = SearchVocabMode::common;
  TriggerInit init = TriggerInit::filler;

  void validate() const {
    if (num_tokens == 0) throw ValidationError("num_tokens must be positive");
    if (candidates_per_step == 0)
      throw ValidationError("candidates_per_step must be positive");
    if (batch_size_generate == 0 || batch_size_evaluate == 0)
      throw ValidationError("batch sizes must be positive");
  }
};

// ---------------------------------------------------------------------------
// Phase 1: candidate generation
// ---------------------------------------------------------------------------

struct ScoredCandidate {
  std::size_t index;  // row into the search-vocabulary embedding matrix
  double score;
};

// First-order replacement scores: score(w) = <emb[w], grad[position]>.
// Returns the k best rows, ties broken by lower row index.
inline std::vector<ScoredCandidate> score_candidates(
    const EmbeddingGradient& grad, const Matrix& emb, std::size_t position,
    std::size_t k) {
  if (k > emb.rows())
    throw ValidationError("candidates_per_step exceeds search vocabulary size");
  const Vec& g = grad.at(position);
  if (g.size() != emb.cols())
    throw ValidationError("gradient width does not match embedding matrix");

  std::vector<ScoredCandidate> scored(emb.rows());
  for (std::size_t w = 0; w < emb.rows(); ++w)
    scored[w] = {w, dot(emb.row(w), g)};
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(k),
                    scored.end(), [](const auto& a, const auto& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.index < b.index;
                    });
  scored.resize(k);
  return scored;
}

// ---------------------------------------------------------------------------
// Phase 2: candidate evaluation
// ---------------------------------------------------------------------------

// Log-likelihood of `gold` at the answer slot of a rendered query.
inline double gold_log_prob(const LanguageModel& lm, const RenderedQuery& query,
                            const std::string& gold,
                            const EmbeddingOverrides* overrides = nullptr) {
  const auto gold_id = lm.surface_token_id(gold);
  if (!gold_id)
    throw AdapterError("gold token \"" + gold + "\" is not encodable on " +
                       lm.info().model_id);
  const Vec lsm = log_softmax(lm.answer_logits(query, overrides));
  return lsm[static_cast<std::size_t>(*gold_id)];
}

// Mean gold log-likelihood of a prompt over a batch.
inline double batch_log_likelihood(const LanguageModel& lm,
                                   const DiscretePrompt& prompt,
                                   const std::vector<Fact>& batch) {
  const PromptTemplate tpl = prompt.to_template();
  double total = 0.0;
  for (const Fact& fact : batch)
    total += gold_log_prob(lm, render(lm, tpl, fact.subject), fact.object);
  return total / static_cast<double>(batch.size());
}

struct CandidateChoice {
  std::string token;
  double score;                 // mean log p(gold) on the evaluation batch
  std::vector<double> scores;   // incumbent first, then candidates in order
};

// Re-scores candidates on the evaluator over a fresh batch and keeps the
// best. The incumbent trigger competes too, so a step never lowers the
// evaluation objective on that batch; it also wins ties.
inline CandidateChoice evaluate_candidates(
    const LanguageModel& evaluator, const DiscretePrompt& base,
    std::size_t position, const std::vector<std::string>& candidates,
    const std::vector<Fact>& batch) {
  if (batch.empty())
    throw ValidationError("evaluate_candidates requires a non-empty batch");
  if (candidates.empty())
    throw ValidationError("evaluate_candidates requires candidates");
  if (position >= base.trigger_tokens.size())
    throw ValidationError("trigger position out of range");

  CandidateChoice choice;
  choice.token = base.trigger_tokens[position];
  choice.score = -std::numeric_limits<double>::infinity();

  DiscretePrompt probe = base;
  bool any_finite = false;
  const auto consider = [&](const std::string& token) {
    probe.trigger_tokens[position] = token;
    const double score = batch_log_likelihood(evaluator, probe, batch);
    choice.scores.push_back(score);
    if (std::isfinite(score)) any_finite = true;
    if (score > choice.score) {
      choice.score = score;
      choice.token = token;
    }
  };

  consider(base.trigger_tokens[position]);
  for (const auto& token : candidates)
    if (token != base.trigger_tokens[position]) consider(token);

  if (!any_finite)
    throw AdapterError("all candidates scored non-finite likelihood");
  return choice;
}

// ---------------------------------------------------------------------------
// Search vocabulary
// ---------------------------------------------------------------------------

// Tokens eligible as triggers, single-piece encodable on both models, with
// the generator-side embedding of each row. Kept sorted for reproducibility.
struct SearchVocabulary {
  std::vector<std::string> tokens;
  std::vector<TokenId> generator_ids;
  Matrix generator_embeddings;  // one row per token
};

inline SearchVocabulary build_search_vocabulary(
    const LanguageModel& generator, const LanguageModel& evaluator,
    SearchVocabMode mode, const VocabSet* common_vocab) {
  std::vector<std::string> source;
  if (mode == SearchVocabMode::common) {
    if (common_vocab) {
      source = common_vocab->tokens();
    } else {
      source = build_common_vocab({generator.surface_vocabulary(),
                                   evaluator.surface_vocabulary()})
                   .tokens();
    }
  } else {
    source = generator.surface_vocabulary();
    std::sort(source.begin(), source.end());
  }

  SearchVocabulary sv;
  for (const auto& token : source) {
    if (token == PromptTemplate::kSubjectSlot ||
        token == PromptTemplate::kAnswerSlot)
      continue;  // would collide with template slots
    const auto gen_id = generator.surface_token_id(token);
    if (!gen_id) continue;
    if (&generator != &evaluator && !evaluator.surface_token_id(token))
      continue;
    sv.tokens.push_back(token);
    sv.generator_ids.push_back(*gen_id);
  }
  if (sv.tokens.empty())
    throw ValidationError("search vocabulary is empty for this model pair");

  const Matrix& emb = generator.input_embeddings();
  sv.generator_embeddings = Matrix(sv.tokens.size(), emb.cols());
  for (std::size_t r = 0; r < sv.tokens.size(); ++r)
    sv.generator_embeddings.set_row(
        r, emb.row_vec(static_cast<std::size_t>(sv.generator_ids[r])));
  return sv;
}

// ---------------------------------------------------------------------------
// Induction loop
// ---------------------------------------------------------------------------

struct InduceStep {
  std::size_t iteration = 0;
  std::size_t trigger_index = 0;
  std::vector<std::string> candidates;
  std::vector<double> evaluation_scores;  // incumbent first
  std::string winner;
  double winner_score = 0.0;
};

struct InduceTrace {
  std::vector<InduceStep> steps;
  double best_eval_score = -std::numeric_limits<double>::infinity();
  double final_train_score = 0.0;  // mean log p of the returned prompt on train
  std::size_t facts_used = 0;
  std::size_t facts_skipped = 0;   // subject or gold not encodable on the pair
};

// Two-phase gradient-guided trigger search. Each step picks a trigger slot
// round-robin, proposes candidates from the generator's gradient on one
// batch, then lets the evaluator pick the winner on a fresh batch. Passing
// the same model as generator and evaluator is exactly the single-model
// algorithm. Facts are canonicalized by sorting, so the order of `train`
// never affects the result; all randomness comes from cfg.seed.
inline DiscretePrompt induce(const LanguageModel& generator,
                             const LanguageModel& evaluator,
                             const std::string& relation_id,
                             const std::vector<Fact>& train,
                             const SearchConfig& cfg,
                             const VocabSet* common_vocab = nullptr,
                             InduceTrace* trace = nullptr) {
  cfg.validate();
  if (train.empty()) throw ValidationError("induce requires training facts");

  const SearchVocabulary sv = build_search_vocabulary(
      generator, evaluator, cfg.search_vocab, common_vocab);

  // Keep facts whose subject renders and whose gold is scorable on both sides.
  std::vector<Fact> facts;
  std::size_t skipped = 0;
  for (const Fact& f : sorted_copy(train)) {
    const bool gold_ok =
        generator.surface_token_id(f.object).has_value() &&
        evaluator.surface_token_id(f.object).has_value();
    bool subject_ok = gold_ok;
    if (gold_ok) {
      try {
        (void)generator.tokenize(f.subject);
        (void)evaluator.tokenize(f.subject);
      } catch (const AdapterError&) {
        subject_ok = false;
      }
    }
    if (subject_ok)
      facts.push_back(f);
    else
      ++skipped;
  }
  if (facts.empty())
    throw ValidationError(
        "no training fact is scorable on this generator/evaluator pair");

  DiscretePrompt prompt;
  prompt.relation_id = relation_id;
  prompt.provenance = {generator.info().model_id, evaluator.info().model_id,
                       cfg.seed, cfg.iterations};

  // Neutral filler start by default; random search-vocabulary tokens when
  // configured. The filler must render on both models.
  if (cfg.init == TriggerInit::filler) {
    const auto filler = generator.filler_token_id();
    if (!filler)
      throw ValidationError("generator has no filler token; use random init");
    const std::string filler_token =
        generator.native_vocab()[static_cast<std::size_t>(*filler)];
    try {
      (void)evaluator.tokenize(filler_token);
    } catch (const AdapterError&) {
      throw ValidationError("filler token \"" + filler_token +
                            "\" does not render on the evaluator; use random "
                            "init");
    }
    prompt.trigger_tokens.assign(cfg.num_tokens, filler_token);
  } else {
    auto rng = substream(cfg.seed, "induce.init");
    prompt.trigger_tokens.clear();
    for (std::size_t i = 0; i < cfg.num_tokens; ++i)
      prompt.trigger_tokens.push_back(
          sv.tokens[uniform_index(rng, sv.tokens.size())]);
  }

  auto rng_generate = substream(cfg.seed, "induce.batch.generate");
  auto rng_evaluate = substream(cfg.seed, "induce.batch.evaluate");

  DiscretePrompt best = prompt;
  double best_score = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const std::size_t slot = iter % cfg.num_tokens;

    // Phase 1: average the gold log-likelihood gradient at this slot over a
    // generation batch, then take the top-k first-order replacements.
    const auto gen_idx =
        sample_indices(facts.size(), cfg.batch_size_generate, rng_generate);
    Vec grad_sum(generator.info().embedding_dim, 0.0);
    const PromptTemplate tpl = prompt.to_template();
    for (std::size_t i : gen_idx) {
      const RenderedQuery query = render(generator, tpl, facts[i].subject);
      const EmbeddingGradient g =
          input_gradient(generator, query, facts[i].object);
      axpy(1.0, g.at(query.prompt_positions[slot]), grad_sum);
    }
    scale(grad_sum, 1.0 / static_cast<double>(gen_idx.size()));

    EmbeddingGradient slot_grad;
    slot_grad.by_position[slot] = std::move(grad_sum);
    const auto scored = score_candidates(slot_grad, sv.generator_embeddings,
                                         slot, cfg.candidates_per_step);
    std::vector<std::string> candidates;
    candidates.reserve(scored.size());
    for (const auto& c : scored) candidates.push_back(sv.tokens[c.index]);

    // Phase 2: the evaluator re-scores candidates on a fresh batch.
    const auto eval_idx =
        sample_indices(facts.size(), cfg.batch_size_evaluate, rng_evaluate);
    std::vector<Fact> eval_batch;
    eval_batch.reserve(eval_idx.size());
    for (std::size_t i : eval_idx) eval_batch.push_back(facts[i]);

    const CandidateChoice choice =
        evaluate_candidates(evaluator, prompt, slot, candidates, eval_batch);
    prompt.trigger_tokens[slot] = choice.token;

    if (choice.score > best_score) {
      best_score = choice.score;
      best = prompt;
    }
    if (trace)
      trace->steps.push_back({iter, slot, candidates, choice.scores,
                              choice.token, choice.score});
  }

  if (trace) {
    trace->best_eval_score = best_score;
    trace->facts_used = facts.size();
    trace->facts_skipped = skipped;
    trace->final_train_score = batch_log_likelihood(evaluator, best, facts);
  }
  return best;
}

// Single-model AutoPrompt: the same model proposes and evaluates.
inline DiscretePrompt induce_single(const LanguageModel& model,
                                    const std::string& relation_id,
                                    const std::vector<Fact>& train,
                                    const SearchConfig& cfg,
                                    const VocabSet* common_vocab = nullptr,
                                    InduceTrace* trace = nullptr) {
  return induce(model, model, relation_id, train, cfg, common_vocab, trace);
}

}  // namespace promptkit
