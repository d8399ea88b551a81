// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Criterion 10 is an optional
// integration tier and is skipped unless real evaluation data is configured
// (see README).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "promptkit/promptkit.hpp"
#include "support/stubs.hpp"

using namespace promptkit;
using testsupport::oracle_dot;
using testsupport::oracle_matvec;
using testsupport::oracle_softmax;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

double exact_gold_loglik(const StubLM& lm, const DiscretePrompt& prompt,
                         const Fact& fact) {
  const auto q = render(lm, prompt.to_template(), fact.subject);
  const auto& spec = lm.spec();
  Vec m(spec.embeddings.cols(), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < q.token_ids.size(); ++i) {
    if (i == q.answer_position) continue;
    for (std::size_t c = 0; c < m.size(); ++c)
      m[c] += spec.embeddings(static_cast<std::size_t>(q.token_ids[i]), c);
    ++n;
  }
  for (double& x : m) x /= static_cast<double>(n);
  const Vec p = oracle_softmax(oracle_matvec(spec.output_weights, m));
  return std::log(p[static_cast<std::size_t>(*lm.surface_token_id(fact.object))]);
}

// ---------------------------------------------------------------------------

Check criterion_linear_stub_exactness() {
  Check check;
  testsupport::StubOptions opt;
  opt.model_id = "c1";
  opt.content_tokens = 200;
  opt.dim = 8;
  opt.seed = 5;
  opt.output_scale = 1e-4;  // weak logits keep the first-order regime exact
  const auto lm = testsupport::make_stub(opt);
  const VocabSet vocab(lm->surface_vocabulary());
  const auto sv =
      build_search_vocabulary(*lm, *lm, SearchVocabMode::common, &vocab);
  check.expect(sv.tokens.size() == 200, "search vocabulary should be 200");

  DiscretePrompt prompt;
  prompt.relation_id = "P1";
  prompt.trigger_tokens = {"w100", "w101", "w102"};
  const Fact fact{"w0", "P1", "w50"};
  const std::size_t slot = 1;

  const auto query = render(*lm, prompt.to_template(), fact.subject);
  const auto grad = input_gradient(*lm, query, fact.object);
  EmbeddingGradient slot_grad;
  slot_grad.by_position[slot] = grad.at(query.prompt_positions[slot]);
  const auto topk = score_candidates(slot_grad, sv.generator_embeddings, slot,
                                     sv.tokens.size());

  std::vector<std::pair<double, std::size_t>> exact;
  for (std::size_t w = 0; w < sv.tokens.size(); ++w) {
    DiscretePrompt probe = prompt;
    probe.trigger_tokens[slot] = sv.tokens[w];
    exact.push_back({exact_gold_loglik(*lm, probe, fact), w});
  }
  std::sort(exact.begin(), exact.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  for (std::size_t i = 0; i < topk.size(); ++i)
    check.expect(topk[i].index == exact[i].second,
                 "ordering diverges at rank " + std::to_string(i));
  return check;
}

Check criterion_gradient_fidelity() {
  Check check;
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    testsupport::StubOptions opt;
    opt.model_id = "c2";
    opt.content_tokens = 30;
    opt.dim = 10;
    opt.seed = seed;
    const auto lm = testsupport::make_stub(opt);

    DiscretePrompt prompt;
    prompt.relation_id = "P1";
    prompt.trigger_tokens = {"w20", "w21", "w22"};
    const auto q = render(*lm, prompt.to_template(), "w0");
    const std::string gold = "w10";
    const auto gold_id = *lm->surface_token_id(gold);
    const auto grad = input_gradient(*lm, q, gold);

    const auto log_p = [&](const EmbeddingOverrides& ov) {
      const Vec p = oracle_softmax(lm->answer_logits(q, &ov));
      return std::log(p[static_cast<std::size_t>(gold_id)]);
    };

    auto rng = substream(seed, "acceptance.fd");
    const double h = 1e-3;
    for (std::size_t pos : q.prompt_positions) {
      const Vec base = lm->input_embeddings().row_vec(
          static_cast<std::size_t>(q.token_ids[pos]));
      for (int dir = 0; dir < 5; ++dir) {
        Vec d(base.size());
        for (double& v : d) v = gaussian(rng);
        Vec plus = base, minus = base;
        for (std::size_t c = 0; c < base.size(); ++c) {
          plus[c] += h * d[c];
          minus[c] -= h * d[c];
        }
        EmbeddingOverrides op{{pos, plus}}, om{{pos, minus}};
        const double fd = (log_p(op) - log_p(om)) / (2.0 * h);
        const double an = oracle_dot(grad.at(pos), d);
        const double rel =
            std::abs(fd) > 1e-12 ? std::abs(an - fd) / std::abs(fd)
                                 : std::abs(an);
        check.expect(rel <= 1e-3, "relative error " + std::to_string(rel));
      }
    }
  }
  // no real-model adapter is registered in this build; the stub check is the
  // required part, the real-model half is conditional on availability
  return check;
}

std::vector<Fact> twenty_facts() {
  std::vector<Fact> facts;
  for (int i = 0; i < 20; ++i)
    facts.push_back({"w" + std::to_string(i % 8), "P1",
                     "w" + std::to_string(10 + i % 5)});
  return facts;
}

Check criterion_reduction_law() {
  Check check;
  const auto lm = testsupport::make_stub(
      {.model_id = "c3", .content_tokens = 24, .dim = 8, .seed = 9});
  SearchConfig cfg;
  cfg.num_tokens = 5;
  cfg.iterations = 15;
  cfg.candidates_per_step = 6;
  cfg.batch_size_generate = 8;
  cfg.batch_size_evaluate = 8;
  cfg.seed = 1234;

  InduceTrace mixed, single;
  const auto pm = induce(*lm, *lm, "P1", twenty_facts(), cfg, nullptr, &mixed);
  const auto ps = induce_single(*lm, "P1", twenty_facts(), cfg, nullptr,
                                &single);
  check.expect(pm == ps, "prompts differ");
  check.expect(mixed.steps.size() == single.steps.size(), "trace sizes");
  for (std::size_t i = 0; i < mixed.steps.size(); ++i) {
    check.expect(mixed.steps[i].winner == single.steps[i].winner,
                 "winner differs at step " + std::to_string(i));
    check.expect(mixed.steps[i].candidates == single.steps[i].candidates,
                 "candidates differ at step " + std::to_string(i));
    check.expect(mixed.steps[i].evaluation_scores ==
                     single.steps[i].evaluation_scores,
                 "scores differ at step " + std::to_string(i));
  }
  return check;
}

Check criterion_planted_optimum() {
  Check check;
  StubSpec spec;
  spec.model_id = "c4";
  spec.kind = LMKind::masked;
  for (int i = 0; i < 16; ++i) spec.vocab.push_back("w" + std::to_string(i));
  spec.vocab.push_back("[MASK]");
  spec.vocab.push_back("[PAD]");
  spec.mask_token = "[MASK]";
  spec.filler_token = "[PAD]";
  spec.embeddings = testsupport::random_matrix(18, 6, 50, 0.3);
  spec.output_weights = testsupport::random_matrix(18, 6, 51, 0.3);
  for (std::size_t r = 0; r < 18; ++r) {
    spec.embeddings(r, 0) = 0.0;
    spec.output_weights(r, 0) = 0.0;
  }
  spec.embeddings(9, 0) = 1.0;        // the planted trigger
  spec.output_weights(5, 0) = 200.0;  // makes gold w5 certain
  const StubLM lm(std::move(spec));

  std::vector<Fact> facts;
  for (int i = 0; i < 6; ++i)
    facts.push_back({"w" + std::to_string(i), "P1", "w5"});

  SearchConfig cfg;
  cfg.num_tokens = 5;
  cfg.iterations = 50;
  cfg.candidates_per_step = 8;
  cfg.batch_size_generate = 4;
  cfg.batch_size_evaluate = 4;
  cfg.init = TriggerInit::random;

  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const auto prompt = induce(lm, lm, "P1", facts, cfg);
    if (std::count(prompt.trigger_tokens.begin(), prompt.trigger_tokens.end(),
                   std::string("w9")) > 0)
      ++hits;
  }
  check.expect(hits >= 9, "planted token found in only " +
                              std::to_string(hits) + "/10 seeds");
  return check;
}

Check criterion_precision_oracle() {
  Check check;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    testsupport::StubOptions opt;
    opt.model_id = "c5";
    opt.content_tokens = 18;
    opt.dim = 6;
    opt.seed = 100 + trial;
    const auto lm = testsupport::make_stub(opt);
    const VocabSet vocab(lm->surface_vocabulary());

    auto rng = substream(trial, "acceptance.p1");
    RelationFacts test;
    for (int i = 0; i < 12; ++i)
      test["P1"].push_back({"w" + std::to_string(uniform_index(rng, 8)), "P1",
                            "w" + std::to_string(8 + uniform_index(rng, 6))});
    std::map<std::string, PromptTemplate> prompts{
        {"P1", PromptTemplate::parse("[X] w15 w16 [Y]")}};

    const auto report = precision_at_1(*lm, prompts, test, vocab);

    // hand enumeration with local math
    const auto& spec = lm->spec();
    std::size_t correct = 0;
    for (const auto& fact : test["P1"]) {
      const auto q = render(*lm, prompts.at("P1"), fact.subject);
      Vec m(spec.embeddings.cols(), 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < q.token_ids.size(); ++i) {
        if (i == q.answer_position) continue;
        for (std::size_t c = 0; c < m.size(); ++c)
          m[c] += spec.embeddings(static_cast<std::size_t>(q.token_ids[i]), c);
        ++n;
      }
      for (double& x : m) x /= static_cast<double>(n);
      const Vec p = oracle_softmax(oracle_matvec(spec.output_weights, m));
      std::string top;
      double top_p = -1.0;
      for (const auto& token : vocab.tokens()) {
        const auto id = lm->surface_token_id(token);
        if (id && p[static_cast<std::size_t>(*id)] > top_p) {
          top_p = p[static_cast<std::size_t>(*id)];
          top = token;
        }
      }
      if (top == fact.object) ++correct;
    }
    check.expect(report.correct == correct,
                 "trial " + std::to_string(trial) + " correct count");
    check.expect(report.micro_average ==
                     double(correct) / double(test["P1"].size()),
                 "trial " + std::to_string(trial) + " micro average");
  }

  // majority baseline vs its count-argmax oracle
  auto rng = substream(77, "acceptance.majority");
  for (int trial = 0; trial < 5; ++trial) {
    RelationFacts train, test;
    const std::vector<std::string> objects{"a", "b", "c"};
    for (int rel = 0; rel < 2; ++rel) {
      const std::string id = "P" + std::to_string(rel);
      for (int i = 0; i < 10; ++i)
        train[id].push_back({"s", id, objects[uniform_index(rng, 3)]});
      for (int i = 0; i < 6; ++i)
        test[id].push_back({"t", id, objects[uniform_index(rng, 3)]});
    }
    std::size_t correct = 0, total = 0;
    for (const auto& [rel, facts] : test) {
      std::map<std::string, int> counts;
      for (const auto& f : train[rel]) ++counts[f.object];
      std::string best;
      int best_n = -1;
      for (const auto& [obj, n] : counts)
        if (n > best_n) { best = obj; best_n = n; }
      for (const auto& f : facts) {
        ++total;
        if (f.object == best) ++correct;
      }
    }
    check.expect(majority_baseline(train, test) ==
                     double(correct) / double(total),
                 "majority baseline mismatch");
  }
  return check;
}

Check criterion_statistics_oracles() {
  Check check;
  auto rng = substream(31, "acceptance.stats");

  // Welch
  std::vector<double> a, b;
  for (int i = 0; i < 9; ++i) a.push_back(gaussian(rng));
  for (int i = 0; i < 14; ++i) b.push_back(gaussian(rng) + 0.3);
  const auto mean_of = [](const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s / double(xs.size());
  };
  const auto var_of = [&](const std::vector<double>& xs) {
    const double m = mean_of(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / double(xs.size() - 1);
  };
  const double tw = (mean_of(a) - mean_of(b)) /
                    std::sqrt(var_of(a) / a.size() + var_of(b) / b.size());
  check.expect(std::abs(welch_t(a, b) - tw) <= 1e-12, "welch t");

  // Pearson
  std::vector<double> x, y;
  for (int i = 0; i < 15; ++i) {
    x.push_back(gaussian(rng));
    y.push_back(gaussian(rng));
  }
  double mx = mean_of(x), my = mean_of(y), sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  check.expect(std::abs(pearson_r(x, y) - sxy / std::sqrt(sxx * syy)) <= 1e-12,
               "pearson r");

  // shuffle mean/std over per-repeat accuracies
  const auto lm = testsupport::make_stub(
      {.model_id = "c6", .content_tokens = 14, .dim = 6, .seed = 7});
  const VocabSet vocab(lm->surface_vocabulary());
  RelationFacts test;
  for (int i = 0; i < 6; ++i)
    test["P1"].push_back({"w" + std::to_string(i), "P1",
                          "w" + std::to_string(7 + i % 3)});
  std::map<std::string, PromptTemplate> prompts{
      {"P1", PromptTemplate::parse("[X] w10 w11 w12 [Y]")}};
  const auto stats = shuffle_accuracy(*lm, prompts, test, vocab, 10, 3);
  const double sm = mean_of(stats.accuracies);
  const double ss = std::sqrt(var_of(stats.accuracies));
  check.expect(std::abs(stats.mean_accuracy - sm) <= 1e-12, "shuffle mean");
  check.expect(std::abs(stats.std_accuracy - ss) <= 1e-12, "shuffle std");

  // relative-matrix subtraction
  TransferMatrix m;
  for (int i = 0; i < 4; ++i) {
    m.sources.push_back("m" + std::to_string(i));
    m.targets.push_back("m" + std::to_string(i));
  }
  m.cells = Matrix(4, 4);
  m.skipped_facts = Matrix(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) m.cells(r, c) = uniform_unit(rng);
  std::map<std::string, double> same;
  for (std::size_t r = 0; r < 4; ++r) same[m.targets[r]] = m.cells(r, r);
  const auto rel = relative_matrix(m, same);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      check.expect(rel.cells(r, c) == m.cells(r, c) - m.cells(r, r),
                   "relative matrix cell");
  return check;
}

Check criterion_order_probes() {
  Check check;

  // position-blind stub: shuffle ratio exactly 100%, flat deletion sweep
  StubSpec bag;
  bag.model_id = "c7-bag";
  bag.kind = LMKind::masked;
  bag.pooling = StubPooling::mean_context;
  for (int i = 0; i < 14; ++i) bag.vocab.push_back("w" + std::to_string(i));
  bag.vocab.push_back("[MASK]");
  bag.vocab.push_back("[PAD]");
  bag.mask_token = "[MASK]";
  bag.filler_token = "[PAD]";
  bag.embeddings = testsupport::random_matrix(16, 6, 61, 0.2);
  bag.output_weights = testsupport::random_matrix(16, 6, 62, 0.2);
  for (std::size_t r = 0; r < 16; ++r) {
    bag.embeddings(r, 0) = 0.0;
    bag.output_weights(r, 0) = 0.0;
  }
  bag.embeddings(10, 0) = 1.0;
  bag.output_weights(7, 0) = 200.0;
  const StubLM bag_lm(std::move(bag));
  const VocabSet bag_vocab(bag_lm.surface_vocabulary());
  RelationFacts bag_test;
  for (int i = 0; i < 6; ++i)
    bag_test["P1"].push_back({"w" + std::to_string(i), "P1", "w7"});
  std::map<std::string, PromptTemplate> bag_prompts{
      {"P1", PromptTemplate::parse("[X] w10 w11 w12 [Y]")}};

  const auto stats =
      shuffle_accuracy(bag_lm, bag_prompts, bag_test, bag_vocab, 10, 5);
  check.expect(stats.mean_ratio == 100.0, "bag shuffle ratio not 100");
  check.expect(stats.std_ratio == 0.0, "bag shuffle std not 0");

  StubSpec blind = bag_lm.spec();
  blind.model_id = "c7-blind";
  blind.pooling = StubPooling::mean_non_prompt;
  const StubLM blind_lm(std::move(blind));
  const auto sweep =
      token_deletion_sweep(blind_lm, bag_prompts, bag_test, bag_vocab);
  for (double acc : sweep.per_position)
    check.expect(acc == sweep.full_sequence, "trigger-blind sweep not flat");

  // last-token-keyed stub: deleting the last position collapses accuracy
  StubSpec keyed;
  keyed.model_id = "c7-keyed";
  keyed.kind = LMKind::masked;
  keyed.pooling = StubPooling::last_prompt;
  for (int i = 0; i < 10; ++i) keyed.vocab.push_back("w" + std::to_string(i));
  keyed.vocab.push_back("[MASK]");
  keyed.vocab.push_back("[PAD]");
  keyed.mask_token = "[MASK]";
  keyed.filler_token = "[PAD]";
  keyed.embeddings = testsupport::random_matrix(12, 6, 63, 0.2);
  keyed.output_weights = testsupport::random_matrix(12, 6, 64, 0.2);
  for (std::size_t r = 0; r < 12; ++r) {
    keyed.embeddings(r, 0) = 0.0;
    keyed.embeddings(r, 1) = 0.0;
    keyed.output_weights(r, 0) = 0.0;
    keyed.output_weights(r, 1) = 0.0;
  }
  keyed.embeddings(1, 0) = 1.0;
  keyed.output_weights(5, 0) = 100.0;  // w1 at the key answers w5
  keyed.embeddings(2, 1) = 1.0;
  keyed.output_weights(6, 1) = 100.0;  // w2 at the key answers w6
  const StubLM keyed_lm(std::move(keyed));
  const VocabSet keyed_vocab(keyed_lm.surface_vocabulary());
  RelationFacts keyed_test;
  for (int i = 0; i < 6; ++i)
    keyed_test["P1"].push_back({"w" + std::to_string(i % 4), "P1", "w5"});
  std::map<std::string, PromptTemplate> keyed_prompts{
      {"P1", PromptTemplate::parse("[X] w2 w2 w1 [Y]")}};

  const auto keyed_sweep = token_deletion_sweep(keyed_lm, keyed_prompts,
                                                keyed_test, keyed_vocab);
  check.expect(keyed_sweep.full_sequence == 1.0, "keyed baseline not 1");
  check.expect(keyed_sweep.per_position[0] == 1.0, "early deletion changed");
  check.expect(keyed_sweep.per_position[1] == 1.0, "early deletion changed");
  check.expect(keyed_sweep.per_position[2] == 0.0, "last deletion did not "
                                                   "collapse");
  return check;
}

Check criterion_soft_prompt_contracts() {
  Check check;

  // deterministic dimension-mismatch error
  const auto d6 = testsupport::make_stub(
      {.model_id = "c8-d6", .content_tokens = 10, .dim = 6, .seed = 71});
  const auto d8 = testsupport::make_stub(
      {.model_id = "c8-d8", .content_tokens = 10, .dim = 8, .seed = 72});
  SoftPrompt p6;
  p6.relation_id = "P1";
  p6.vectors = {Vec(6, 0.5)};
  for (int i = 0; i < 3; ++i) {
    bool threw = false;
    try {
      transfer_soft(p6, *d8);
    } catch (const DimensionMismatchError&) {
      threw = true;
    }
    check.expect(threw, "dimension mismatch did not throw");
  }

  // same-model transfer reproduces same-model scoring bit-exactly
  std::vector<Fact> facts;
  for (int i = 0; i < 6; ++i)
    facts.push_back({"w" + std::to_string(i), "P1",
                     "w" + std::to_string(6 + i % 3)});
  SoftTrainConfig tc;
  tc.length = 2;
  tc.epochs = 8;
  tc.seed = 3;
  const auto trained = train_soft(*d6, "P1", facts, tc);
  const VocabSet vocab(d6->surface_vocabulary());
  const VocabIndex index(*d6, vocab);
  const auto provider = transfer_soft(trained.prompt, *d6);
  for (const auto& fact : facts) {
    const auto via = provider.distribution(fact.subject, index);
    const auto tpl = detail_soft::placeholder_template(*d6, tc.length);
    const auto q = render(*d6, tpl, fact.subject);
    const auto ov = detail_soft::overrides_for(q, trained.prompt.vectors);
    const auto direct = predict_object_distribution(*d6, q, index, &ov);
    for (std::size_t i = 0; i < vocab.size(); ++i)
      check.expect(via.score(i) == direct.score(i),
                   "transfer distribution differs");
  }

  // discretization vs exhaustive scan, |V| = 500
  const Matrix emb = testsupport::random_matrix(500, 8, 73, 1.0);
  std::vector<std::string> names;
  for (int i = 0; i < 500; ++i) names.push_back("t" + std::to_string(i));
  auto rng = substream(9, "acceptance.disc");
  SoftPrompt sp;
  for (int p = 0; p < 5; ++p) {
    Vec v(8);
    for (double& xv : v) xv = gaussian(rng);
    sp.vectors.push_back(v);
  }
  const auto discrete = discretize(sp, emb, names);
  for (std::size_t p = 0; p < sp.vectors.size(); ++p) {
    std::size_t best = 0;
    double best_cos = -2.0;
    for (std::size_t r = 0; r < emb.rows(); ++r) {
      double vv = 0, rr = 0, vr = 0;
      for (std::size_t c = 0; c < 8; ++c) {
        vv += sp.vectors[p][c] * sp.vectors[p][c];
        rr += emb(r, c) * emb(r, c);
        vr += sp.vectors[p][c] * emb(r, c);
      }
      const double cs = vr / std::sqrt(vv * rr);
      if (cs > best_cos) {
        best_cos = cs;
        best = r;
      }
    }
    check.expect(discrete.trigger_tokens[p] == names[best],
                 "nearest neighbor mismatch at position " + std::to_string(p));
  }
  return check;
}

Check criterion_ensembling() {
  Check check;
  StubSpec spec;
  spec.model_id = "c9";
  spec.kind = LMKind::masked;
  spec.pooling = StubPooling::last_prompt;
  for (int i = 0; i < 10; ++i) spec.vocab.push_back("w" + std::to_string(i));
  spec.vocab.push_back("[MASK]");
  spec.vocab.push_back("[PAD]");
  spec.mask_token = "[MASK]";
  spec.filler_token = "[PAD]";
  spec.embeddings = testsupport::random_matrix(12, 6, 81, 0.2);
  spec.output_weights = testsupport::random_matrix(12, 6, 82, 0.2);
  for (std::size_t r = 0; r < 12; ++r) {
    spec.embeddings(r, 0) = 0.0;
    spec.output_weights(r, 0) = 0.0;
  }
  spec.embeddings(1, 0) = 1.0;
  spec.output_weights(5, 0) = 100.0;
  const StubLM lm(std::move(spec));
  const VocabSet vocab(lm.surface_vocabulary());
  const VocabIndex index(lm, vocab);

  CandidatePool pool;
  pool.relation_id = "P1";
  pool.candidates = {PromptTemplate::parse("[X] w1 [Y]"),
                     PromptTemplate::parse("[X] w2 [Y]")};
  const Fact fact{"w0", "P1", "w5"};

  // one-hot mixture equals the single-candidate prediction exactly
  EnsembleWeights onehot{{60.0, 0.0}};
  const auto mixed = ensemble_predict(pool, onehot, lm, fact, index);
  const auto solo = predict_object_distribution(
      lm, render(lm, pool.candidates[0], fact.subject), index);
  for (std::size_t i = 0; i < vocab.size(); ++i)
    check.expect(mixed.score(i) == solo.score(i), "one-hot mixture differs");

  // separable fixture drives the winning weight to >= 0.99
  std::vector<Fact> facts;
  for (int i = 0; i < 10; ++i)
    facts.push_back({"w" + std::to_string(i % 4), "P1", "w5"});
  EnsembleTrainConfig tc;
  tc.learning_rate = 5.0;
  tc.epochs = 300;
  const auto trained = ensemble_optimize(pool, lm, facts, tc);
  check.expect(trained.weights.exp_normalized()[0] >= 0.99,
               "winning weight below 0.99");
  return check;
}

// Optional integration tier. Runs only when PROMPTKIT_LAMA_DATA points at a
// directory with relations.tsv, train/, test/ and vocab.txt built from the
// real filtered dataset; checks the majority baseline against 26.91% +- 0.5%.
// The cross-model part additionally needs real pretrained-model adapters,
// which this build does not bundle.
bool criterion_integration(std::string& message) {
  const char* dir = std::getenv("PROMPTKIT_LAMA_DATA");
  if (!dir) {
    message = "set PROMPTKIT_LAMA_DATA to run (real dataset + models; "
              "excluded from CI)";
    return true;  // skipped
  }
  const std::string root(dir);
  const auto relations = load_relations(root + "/relations.tsv");
  const auto vocab = load_vocab(root + "/vocab.txt");
  RelationFacts train, test;
  for (const auto& spec : relations) {
    train[spec.relation_id] = filter_facts(
        load_facts(root + "/train/" + spec.relation_id + ".jsonl",
                   spec.relation_id)
            .facts,
        vocab);
    test[spec.relation_id] = filter_facts(
        load_facts(root + "/test/" + spec.relation_id + ".jsonl",
                   spec.relation_id)
            .facts,
        vocab);
  }
  const double acc = majority_baseline(train, test);
  // reference counts for the official filtered benchmark: 11,511 common
  // tokens, 25,247 train facts, 25,358 test facts
  message = "majority baseline " + std::to_string(acc) + ", vocab " +
            std::to_string(vocab.size()) + " tokens, train " +
            std::to_string(total_facts(train)) + ", test " +
            std::to_string(total_facts(test));
  return std::abs(acc - 0.2691) <= 0.005;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    std::string name;
    std::function<Check()> run;
    double limit_seconds;
  };

  const std::vector<Criterion> criteria{
      {1, "linear-stub exactness", criterion_linear_stub_exactness, 5.0},
      {2, "gradient fidelity", criterion_gradient_fidelity, 30.0},
      {3, "reduction law", criterion_reduction_law, 60.0},
      {4, "planted-optimum recovery", criterion_planted_optimum, 120.0},
      {5, "precision@1 oracle equivalence", criterion_precision_oracle, 10.0},
      {6, "statistics oracles", criterion_statistics_oracles, 5.0},
      {7, "order-sensitivity probes", criterion_order_probes, 30.0},
      {8, "soft-prompt contracts", criterion_soft_prompt_contracts, 30.0},
      {9, "ensembling", criterion_ensembling, 60.0},
  };

  bool all_ok = true;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check check;
    try {
      check = c.run();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (seconds > c.limit_seconds) {
      check.ok = false;
      check.detail = "exceeded time limit";
    }
    all_ok = all_ok && check.ok;
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n",
                check.ok ? "PASS" : "FAIL", c.number, c.name.c_str(), seconds,
                check.ok ? "" : " - ", check.ok ? "" : check.detail.c_str());
  }

  std::string message;
  const auto start = std::chrono::steady_clock::now();
  const char* dir = std::getenv("PROMPTKIT_LAMA_DATA");
  const bool ok10 = criterion_integration(message);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (!dir) {
    std::printf("[SKIP] criterion 10: integration tier (optional) - %s\n",
                message.c_str());
  } else {
    std::printf("[%s] criterion 10: integration tier (%.2fs) - %s\n",
                ok10 ? "PASS" : "FAIL", seconds, message.c_str());
    all_ok = all_ok && ok10;
  }

  return all_ok ? 0 : 1;
}
