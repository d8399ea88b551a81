#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "promptkit/corpus.hpp"
#include "promptkit/eval.hpp"
#include "promptkit/lm.hpp"

namespace promptkit {

// Externally supplied candidate prompts for one relation. Candidate
// generation (mining, paraphrasing) happens upstream; pools arrive as files.
struct CandidatePool {
  std::string relation_id;
  std::vector<PromptTemplate> candidates;

  void validate() const {
    if (candidates.empty())
      throw ValidationError("candidate pool for " + relation_id + " is empty");
  }
};

// Pool file: one template per line; '#' lines are comments.
inline CandidatePool load_candidate_pool(const std::string& path,
                                         const std::string& relation_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open candidate pool: " + path);
  CandidatePool pool;
  pool.relation_id = relation_id;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    pool.candidates.push_back(PromptTemplate::parse(line));
  }
  pool.validate();
  return pool;
}

// Best candidate by micro precision@1 on the training facts; ties keep the
// earliest pool entry.
inline PromptTemplate select_top1(const CandidatePool& pool,
                                  const LanguageModel& lm,
                                  const std::vector<Fact>& train,
                                  const VocabSet& vocab) {
  pool.validate();
  if (train.empty()) throw ValidationError("select_top1 requires facts");

  RelationFacts test;
  test[pool.relation_id] = train;

  std::size_t best = 0;
  double best_acc = -1.0;
  for (std::size_t j = 0; j < pool.candidates.size(); ++j) {
    std::map<std::string, PromptTemplate> prompts{
        {pool.relation_id, pool.candidates[j]}};
    const double acc = precision_at_1(lm, prompts, test, vocab).micro_average;
    if (acc > best_acc) {
      best_acc = acc;
      best = j;
    }
  }
  return pool.candidates[best];
}

// ---------------------------------------------------------------------------
// Weighted ensembling
// ---------------------------------------------------------------------------

// One learnable weight per candidate; softmax-normalized into mixture
// coefficients whenever predictions are made.
struct EnsembleWeights {
  std::vector<double> weights;

  std::vector<double> exp_normalized() const {
    double mx = -std::numeric_limits<double>::infinity();
    for (double w : weights) mx = std::max(mx, w);
    double sum = 0.0;
    std::vector<double> q(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j) {
      q[j] = std::exp(weights[j] - mx);
      sum += q[j];
    }
    for (double& v : q) v /= sum;
    return q;
  }
};

// Mixture of candidate distributions in probability space with fixed simplex
// coefficients. A one-hot coefficient vector returns that candidate's
// distribution object unchanged, bit for bit.
inline TokenDistribution mixture_distribution(
    const std::vector<TokenDistribution>& dists,
    const std::vector<double>& coefficients) {
  if (dists.empty() || dists.size() != coefficients.size())
    throw ValidationError("mixture arity mismatch");
  for (std::size_t j = 0; j < coefficients.size(); ++j)
    if (coefficients[j] == 1.0) return dists[j];

  const std::size_t n = dists[0].size();
  std::vector<double> probs(n, 0.0);
  std::vector<TokenId> native(n, -1);
  for (std::size_t j = 0; j < dists.size(); ++j) {
    if (dists[j].size() != n)
      throw ValidationError("mixture over differently sized distributions");
    for (std::size_t i = 0; i < n; ++i) {
      if (!dists[j].supported(i)) continue;
      probs[i] += coefficients[j] * std::exp(dists[j].score(i));
      native[i] = dists[j].native_id(i);
    }
  }
  std::vector<double> log_probs(n);
  for (std::size_t i = 0; i < n; ++i)
    log_probs[i] = native[i] >= 0
                       ? std::log(probs[i])
                       : -std::numeric_limits<double>::infinity();
  return TokenDistribution(std::move(log_probs), std::move(native));
}

// Answer distribution of the weighted prompt ensemble for one fact.
inline TokenDistribution ensemble_predict(const CandidatePool& pool,
                                          const EnsembleWeights& w,
                                          const LanguageModel& lm,
                                          const Fact& fact,
                                          const VocabIndex& index) {
  pool.validate();
  if (w.weights.size() != pool.candidates.size())
    throw ValidationError("weight count does not match pool size");
  std::vector<TokenDistribution> dists;
  dists.reserve(pool.candidates.size());
  for (const auto& tpl : pool.candidates)
    dists.push_back(predict_object_distribution(
        lm, render(lm, tpl, fact.subject), index));
  return mixture_distribution(dists, w.exp_normalized());
}

inline TokenDistribution ensemble_predict(const CandidatePool& pool,
                                          const EnsembleWeights& w,
                                          const LanguageModel& lm,
                                          const Fact& fact,
                                          const VocabSet& vocab) {
  return ensemble_predict(pool, w, lm, fact, VocabIndex(lm, vocab));
}

struct EnsembleTrainConfig {
  double learning_rate = 1.0;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
};

struct EnsembleTrainResult {
  EnsembleWeights weights;
  std::vector<double> epoch_objectives;  // mean log mixture prob, index 0 = init
};

// Learns ensemble weights by full-batch gradient ascent on the mean log
// mixture likelihood of the gold objects. Per-candidate gold probabilities
// are fixed given the model, so they are precomputed once.
inline EnsembleTrainResult ensemble_optimize(const CandidatePool& pool,
                                             const LanguageModel& lm,
                                             const std::vector<Fact>& train,
                                             const EnsembleTrainConfig& cfg) {
  pool.validate();
  if (pool.candidates.size() < 2)
    throw ValidationError("ensemble_optimize needs at least 2 candidates");
  if (train.empty()) throw ValidationError("ensemble_optimize requires facts");

  const std::vector<Fact> facts = sorted_copy(train);
  const std::size_t m = pool.candidates.size();

  // gold_prob[f][j] = p_j(gold_f)
  std::vector<std::vector<double>> gold_prob(facts.size(),
                                             std::vector<double>(m, 0.0));
  for (std::size_t f = 0; f < facts.size(); ++f) {
    const auto gold_id = lm.surface_token_id(facts[f].object);
    if (!gold_id)
      throw AdapterError("gold token \"" + facts[f].object +
                         "\" is not encodable on " + lm.info().model_id);
    for (std::size_t j = 0; j < m; ++j) {
      const RenderedQuery q =
          render(lm, pool.candidates[j], facts[f].subject);
      const Vec lsm = log_softmax(lm.answer_logits(q));
      gold_prob[f][j] = std::exp(lsm[static_cast<std::size_t>(*gold_id)]);
    }
  }

  EnsembleWeights w;
  w.weights.assign(m, 0.0);

  const auto objective = [&](const std::vector<double>& q) {
    double total = 0.0;
    for (const auto& probs : gold_prob) {
      double mix = 0.0;
      for (std::size_t j = 0; j < m; ++j) mix += q[j] * probs[j];
      total += std::log(mix);
    }
    return total / static_cast<double>(facts.size());
  };

  EnsembleTrainResult result;
  result.epoch_objectives.push_back(objective(w.exp_normalized()));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<double> q = w.exp_normalized();
    // d objective / d w_k = mean_f q_k (p_k - mix_f) / mix_f
    std::vector<double> grad(m, 0.0);
    for (const auto& probs : gold_prob) {
      double mix = 0.0;
      for (std::size_t j = 0; j < m; ++j) mix += q[j] * probs[j];
      if (mix <= 0.0)
        throw AdapterError("ensemble objective degenerate (zero mixture)");
      for (std::size_t k = 0; k < m; ++k)
        grad[k] += q[k] * (probs[k] - mix) / mix;
    }
    for (std::size_t k = 0; k < m; ++k)
      w.weights[k] +=
          cfg.learning_rate * grad[k] / static_cast<double>(facts.size());

    const double obj = objective(w.exp_normalized());
    if (!std::isfinite(obj))
      throw AdapterError("ensemble training diverged at epoch " +
                         std::to_string(epoch + 1));
    result.epoch_objectives.push_back(obj);
  }

  result.weights = std::move(w);
  return result;
}

// Weights file: one weight per line, aligned with the pool's line order.
inline void save_ensemble_weights(const EnsembleWeights& w,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write weights file: " + path);
  out.precision(17);
  for (double v : w.weights) out << v << '\n';
}

inline EnsembleWeights load_ensemble_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weights file: " + path);
  EnsembleWeights w;
  double v;
  while (in >> v) w.weights.push_back(v);
  if (w.weights.empty()) throw DataError("empty weights file: " + path);
  return w;
}

}  // namespace promptkit
