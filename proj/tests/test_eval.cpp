#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "promptkit/eval.hpp"
#include "promptkit/stub_lm.hpp"
#include "support/stubs.hpp"

using namespace promptkit;
using testsupport::oracle_matvec;
using testsupport::oracle_softmax;

namespace {

// Lookup-table stub: subject s_i predicts g_{(i + shift) % 5}. shift = 0 is
// an oracle that always ranks the gold first; shift = 1 never does.
std::shared_ptr<const StubLM> table_stub(const std::string& id, int shift) {
  StubSpec spec;
  spec.model_id = id;
  spec.kind = LMKind::masked;
  spec.pooling = StubPooling::first_non_prompt;
  for (int i = 0; i < 5; ++i) spec.vocab.push_back("s" + std::to_string(i));
  for (int i = 0; i < 5; ++i) spec.vocab.push_back("g" + std::to_string(i));
  spec.vocab.push_back("t");
  spec.vocab.push_back("[MASK]");
  spec.vocab.push_back("[PAD]");
  spec.mask_token = "[MASK]";
  spec.filler_token = "[PAD]";
  spec.embeddings = Matrix::identity(13);
  spec.output_weights = Matrix(13, 13, 0.0);
  for (int i = 0; i < 5; ++i)
    spec.output_weights(static_cast<std::size_t>(5 + (i + shift) % 5),
                        static_cast<std::size_t>(i)) = 10.0;
  return std::make_shared<const StubLM>(std::move(spec));
}

RelationFacts table_test_facts() {
  RelationFacts test;
  for (int i = 0; i < 5; ++i)
    test["P1"].push_back({"s" + std::to_string(i), "P1",
                          "g" + std::to_string(i)});
  return test;
}

std::map<std::string, PromptTemplate> simple_prompts() {
  return {{"P1", PromptTemplate::parse("[X] t [Y]")}};
}

}  // namespace

TEST_CASE("precision@1 is 1.0 under an oracle stub and 0.0 under an "
          "adversarial one") {
  const VocabSet vocab({"g0", "g1", "g2", "g3", "g4"});
  const auto oracle = table_stub("oracle", 0);
  const auto adversary = table_stub("adversary", 1);
  const auto test = table_test_facts();

  const auto good = precision_at_1(*oracle, simple_prompts(), test, vocab);
  REQUIRE(good.micro_average == 1.0);
  REQUIRE(good.correct == 5);
  REQUIRE(good.skipped == 0);

  const auto bad = precision_at_1(*adversary, simple_prompts(), test, vocab);
  REQUIRE(bad.micro_average == 0.0);
}

TEST_CASE("precision@1 matches per-fact enumeration on a mixed fixture") {
  const auto lm = testsupport::make_stub(
      {.model_id = "mixed", .content_tokens = 20, .dim = 8, .seed = 101});
  const VocabSet vocab(lm->surface_vocabulary());

  RelationFacts test;
  auto rng = substream(7, "eval-fixture");
  for (int rel = 0; rel < 3; ++rel)
    for (int i = 0; i < 10; ++i)
      test["P" + std::to_string(rel)].push_back(
          {"w" + std::to_string(uniform_index(rng, 8)),
           "P" + std::to_string(rel),
           "w" + std::to_string(10 + uniform_index(rng, 6))});

  std::map<std::string, PromptTemplate> prompts;
  prompts["P0"] = PromptTemplate::parse("[X] w16 [Y]");
  prompts["P1"] = PromptTemplate::parse("[X] w17 w18 [Y]");
  prompts["P2"] = PromptTemplate::parse("[X] w19 [Y]");

  const auto report = precision_at_1(*lm, prompts, test, vocab);

  // oracle: hand enumeration with local math
  const auto& spec = lm->spec();
  std::size_t correct = 0, total = 0;
  std::map<std::string, std::size_t> correct_by_rel;
  for (const auto& [rel, facts] : test) {
    for (const auto& fact : facts) {
      ++total;
      const auto q = render(*lm, prompts.at(rel), fact.subject);
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
        if (!id) continue;
        if (p[static_cast<std::size_t>(*id)] > top_p) {
          top_p = p[static_cast<std::size_t>(*id)];
          top = token;
        }
      }
      if (top == fact.object) {
        ++correct;
        ++correct_by_rel[rel];
      }
    }
  }

  REQUIRE(report.total == total);
  REQUIRE(report.correct == correct);
  REQUIRE(report.micro_average ==
          Catch::Approx(double(correct) / double(total)));
  for (const auto& [rel, score] : report.per_relation)
    REQUIRE(score.correct == correct_by_rel[rel]);
}

TEST_CASE("precision@1 is invariant to test fact order") {
  const auto lm = testsupport::make_stub(
      {.model_id = "order", .content_tokens = 16, .dim = 6, .seed = 19});
  const VocabSet vocab(lm->surface_vocabulary());
  RelationFacts test;
  for (int i = 0; i < 8; ++i)
    test["P1"].push_back({"w" + std::to_string(i), "P1",
                          "w" + std::to_string(8 + i % 4)});
  std::map<std::string, PromptTemplate> prompts{
      {"P1", PromptTemplate::parse("[X] w14 [Y]")}};

  const auto a = precision_at_1(*lm, prompts, test, vocab);
  std::reverse(test["P1"].begin(), test["P1"].end());
  const auto b = precision_at_1(*lm, prompts, test, vocab);
  REQUIRE(a.micro_average == b.micro_average);
  REQUIRE(a.correct == b.correct);
}

TEST_CASE("missing prompts and unrenderable facts are handled per contract") {
  const auto lm = table_stub("gaps", 0);
  const VocabSet vocab({"g0", "g1"});
  RelationFacts test;
  test["P9"].push_back({"s0", "P9", "g0"});
  REQUIRE_THROWS_AS(
      precision_at_1(*lm, {}, test, vocab), ValidationError);

  // a subject outside the stub vocabulary is skipped and counted incorrect
  RelationFacts with_bad = table_test_facts();
  with_bad["P1"].push_back({"unknown-subject", "P1", "g0"});
  const VocabSet vocab5({"g0", "g1", "g2", "g3", "g4"});
  const auto report =
      precision_at_1(*lm, simple_prompts(), with_bad, vocab5);
  REQUIRE(report.skipped == 1);
  REQUIRE(report.total == 6);
  REQUIRE(report.micro_average == Catch::Approx(5.0 / 6.0));
}

TEST_CASE("micro average counts facts, not relation means") {
  const auto lm = table_stub("micro", 0);
  const VocabSet vocab({"g0", "g1", "g2", "g3", "g4"});
  RelationFacts test;
  // relation A: 4 facts all correct; relation B: 1 fact, wrong gold label
  for (int i = 0; i < 4; ++i)
    test["PA"].push_back({"s" + std::to_string(i), "PA",
                          "g" + std::to_string(i)});
  test["PB"].push_back({"s0", "PB", "g3"});  // model answers g0

  std::map<std::string, PromptTemplate> prompts{
      {"PA", PromptTemplate::parse("[X] t [Y]")},
      {"PB", PromptTemplate::parse("[X] t [Y]")}};
  const auto report = precision_at_1(*lm, prompts, test, vocab);
  REQUIRE(report.micro_average == Catch::Approx(4.0 / 5.0));  // not (1+0)/2
}

TEST_CASE("1x1 transfer matrix equals the same-model evaluation bit-exactly") {
  const auto lm = table_stub("solo", 0);
  const VocabSet vocab({"g0", "g1", "g2", "g3", "g4"});
  const auto test = table_test_facts();
  std::map<std::string, PromptSet> sources{{"solo", simple_prompts()}};

  const auto grid = transfer_matrix(sources, {lm}, test, vocab);
  REQUIRE(grid.cells.rows() == 1);
  REQUIRE(grid.cells.cols() == 1);
  const auto direct = precision_at_1(*lm, simple_prompts(), test, vocab);
  REQUIRE(grid.cell(0, 0) == direct.micro_average);
}

TEST_CASE("behaviorally identical targets produce identical rows") {
  const auto a = table_stub("twin-a", 0);
  const auto b = table_stub("twin-b", 0);
  const VocabSet vocab({"g0", "g1", "g2", "g3", "g4"});
  const auto test = table_test_facts();
  std::map<std::string, PromptSet> sources{
      {"src1", simple_prompts()},
      {"src2", {{"P1", PromptTemplate::parse("[X] t t [Y]")}}}};

  const auto grid = transfer_matrix(sources, {a, b}, test, vocab);
  for (std::size_t col = 0; col < grid.sources.size(); ++col)
    REQUIRE(grid.cell(0, col) == grid.cell(1, col));
}

TEST_CASE("2x2 grid matches four independent precision_at_1 calls") {
  const auto a = testsupport::make_stub(
      {.model_id = "grid-a", .content_tokens = 16, .dim = 6, .seed = 3});
  const auto b = testsupport::make_stub(
      {.model_id = "grid-b", .content_tokens = 16, .dim = 6, .seed = 4});
  const VocabSet vocab = build_common_vocab(
      {a->surface_vocabulary(), b->surface_vocabulary()});

  RelationFacts test;
  for (int i = 0; i < 9; ++i)
    test["P1"].push_back({"w" + std::to_string(i), "P1",
                          "w" + std::to_string(9 + i % 5)});

  std::map<std::string, PromptSet> sources{
      {"grid-a", {{"P1", PromptTemplate::parse("[X] w14 [Y]")}}},
      {"grid-b", {{"P1", PromptTemplate::parse("[X] w15 [Y]")}}}};
  const std::vector<LMHandlePtr> targets{a, b};

  const auto grid = transfer_matrix(sources, targets, test, vocab);
  for (std::size_t row = 0; row < 2; ++row)
    for (std::size_t col = 0; col < 2; ++col) {
      const auto direct = precision_at_1(
          *targets[row], sources.at(grid.sources[col]), test, vocab);
      REQUIRE(grid.cell(row, col) == direct.micro_average);
    }
}

TEST_CASE("prompts with tokens outside a target's support skip every fact "
          "in that cell") {
  const auto a = testsupport::make_stub(
      {.model_id = "wide", .content_tokens = 20, .dim = 6, .seed = 5});
  const auto b = testsupport::make_stub(
      {.model_id = "slim", .content_tokens = 10, .dim = 6, .seed = 6});
  const VocabSet vocab = build_common_vocab(
      {a->surface_vocabulary(), b->surface_vocabulary()});

  RelationFacts test;
  for (int i = 0; i < 5; ++i)
    test["P1"].push_back({"w" + std::to_string(i), "P1",
                          "w" + std::to_string(5 + i % 3)});

  // w15 only exists on the wide model
  std::map<std::string, PromptSet> sources{
      {"wide-only", {{"P1", PromptTemplate::parse("[X] w15 [Y]")}}}};
  const auto grid = transfer_matrix(sources, {a, b}, test, vocab);
  REQUIRE(grid.skipped_facts(0, 0) == 0.0);
  REQUIRE(grid.skipped_facts(1, 0) == 5.0);  // every fact skipped on slim
  REQUIRE(grid.cell(1, 0) == 0.0);           // skipped counts as incorrect
}

TEST_CASE("relative matrix subtracts per-target same-source accuracy") {
  TransferMatrix m;
  m.sources = {"A", "B"};
  m.targets = {"A", "B"};
  m.cells = Matrix(2, 2);
  m.cells(0, 0) = 0.5; m.cells(0, 1) = 0.3;
  m.cells(1, 0) = 0.2; m.cells(1, 1) = 0.6;
  m.skipped_facts = Matrix(2, 2);

  const auto rel = relative_matrix(m, diagonal_accuracies(m));
  REQUIRE(rel.cell(0, 0) == 0.0);
  REQUIRE(rel.cell(1, 1) == 0.0);
  REQUIRE(rel.cell(0, 1) == Catch::Approx(-0.2));
  REQUIRE(rel.cell(1, 0) == Catch::Approx(-0.4));

  // constant matrix: relative against its own diagonal is all zeros
  TransferMatrix flat = m;
  flat.cells = Matrix(2, 2, 0.42);
  const auto rel_flat = relative_matrix(flat, diagonal_accuracies(flat));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) REQUIRE(rel_flat.cell(r, c) == 0.0);
}

TEST_CASE("relative matrix matches an element-wise oracle on random data") {
  auto rng = substream(9, "relmat");
  TransferMatrix m;
  for (int i = 0; i < 4; ++i) {
    m.sources.push_back("m" + std::to_string(i));
    m.targets.push_back("m" + std::to_string(i));
  }
  m.cells = Matrix(4, 4);
  m.skipped_facts = Matrix(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      m.cells(r, c) = uniform_unit(rng);

  std::map<std::string, double> same;
  for (std::size_t r = 0; r < 4; ++r) same[m.targets[r]] = m.cells(r, r);

  const auto rel = relative_matrix(m, same);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      REQUIRE(rel.cell(r, c) == m.cells(r, c) - m.cells(r, r));
}

TEST_CASE("generalization drop averages the off-diagonal column") {
  TransferMatrix rel;
  rel.sources = {"src"};
  rel.targets = {"src", "t1", "t2"};
  rel.cells = Matrix(3, 1);
  rel.cells(0, 0) = 0.0;    // same-model cell, excluded
  rel.cells(1, 0) = -10.0;
  rel.cells(2, 0) = -20.0;
  rel.skipped_facts = Matrix(3, 1);

  REQUIRE(generalization_drop(rel, "src") == Catch::Approx(-15.0));
  REQUIRE(column_mean(rel, "src", true) == Catch::Approx(-10.0));

  TransferMatrix zeros = rel;
  zeros.cells = Matrix(3, 1, 0.0);
  REQUIRE(generalization_drop(zeros, "src") == 0.0);
}

TEST_CASE("drop/size correlation matches the textbook Pearson formula") {
  auto rng = substream(15, "drop-corr");
  TransferMatrix rel;
  const std::size_t n = 15;
  for (std::size_t i = 0; i < n; ++i) {
    rel.sources.push_back("m" + std::to_string(i));
    rel.targets.push_back("m" + std::to_string(i));
  }
  rel.cells = Matrix(n, n);
  rel.skipped_facts = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      rel.cells(r, c) = r == c ? 0.0 : -uniform_unit(rng);

  std::map<std::string, std::uint64_t> sizes;
  for (std::size_t i = 0; i < n; ++i)
    sizes["m" + std::to_string(i)] = 1000000 * (i + 1) + uniform_index(rng, 500000);

  const double r = drop_size_correlation(rel, sizes);

  // oracle: recompute drops and Pearson by hand
  std::vector<double> drops, xs;
  for (std::size_t c = 0; c < n; ++c) {
    double sum = 0.0;
    for (std::size_t row = 0; row < n; ++row)
      if (row != c) sum += rel.cells(row, c);
    drops.push_back(sum / double(n - 1));
    xs.push_back(double(sizes["m" + std::to_string(c)]));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) { mx += xs[i]; my += drops[i]; }
  mx /= n; my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (drops[i] - my) * (xs[i] - mx);
    sxx += (drops[i] - my) * (drops[i] - my);
    syy += (xs[i] - mx) * (xs[i] - mx);
  }
  REQUIRE(r == Catch::Approx(sxy / std::sqrt(sxx * syy)).margin(1e-12));
}

TEST_CASE("mixture quality correlation on exact and random fixtures") {
  std::map<std::string, double> single;
  std::map<ModelPair, double> mixtures;

  // perfectly linear: mixture accuracy = 2 * partner accuracy
  for (int i = 0; i < 5; ++i) {
    const std::string partner = "e" + std::to_string(i);
    single[partner] = 0.1 * (i + 1);
    mixtures[{"G", partner}] = 0.2 * (i + 1);
  }
  REQUIRE(mixture_quality_correlation(single, mixtures,
                                      MixtureRole::generator) ==
          Catch::Approx(1.0));

  // anti-linear
  std::map<ModelPair, double> anti;
  for (int i = 0; i < 5; ++i)
    anti[{"G", "e" + std::to_string(i)}] = -0.2 * (i + 1);
  REQUIRE(mixture_quality_correlation(single, anti, MixtureRole::generator) ==
          Catch::Approx(-1.0));

  // fixed as evaluator: partner is the generator
  std::map<std::string, double> single_gen;
  std::map<ModelPair, double> as_eval;
  auto rng = substream(3, "mixcorr");
  std::vector<double> xs, ys;
  for (int i = 0; i < 15; ++i) {
    const std::string partner = "g" + std::to_string(i);
    const double x = uniform_unit(rng), y = uniform_unit(rng);
    single_gen[partner] = x;
    as_eval[{partner, "E"}] = y;
    xs.push_back(x);
    ys.push_back(y);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
  mx /= xs.size(); my /= ys.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  REQUIRE(mixture_quality_correlation(single_gen, as_eval,
                                      MixtureRole::evaluator) ==
          Catch::Approx(sxy / std::sqrt(sxx * syy)).margin(1e-12));

  // error paths
  std::map<ModelPair, double> two{{{"G", "a"}, 0.1}, {{"G", "b"}, 0.2}};
  REQUIRE_THROWS_AS(
      mixture_quality_correlation(single, two, MixtureRole::generator),
      ValidationError);
  std::map<std::string, double> flat{{"e0", 0.5}, {"e1", 0.5}, {"e2", 0.5}};
  std::map<ModelPair, double> three{
      {{"G", "e0"}, 0.1}, {{"G", "e1"}, 0.2}, {{"G", "e2"}, 0.3}};
  REQUIRE_THROWS_AS(
      mixture_quality_correlation(flat, three, MixtureRole::generator),
      ValidationError);
}

TEST_CASE("matrix CSV uses target rows and source columns") {
  TransferMatrix m;
  m.sources = {"sA", "sB"};
  m.targets = {"tX", "tY"};
  m.cells = Matrix(2, 2);
  m.cells(0, 0) = 0.25; m.cells(0, 1) = 0.5;
  m.cells(1, 0) = 0.75; m.cells(1, 1) = 1.0;
  m.skipped_facts = Matrix(2, 2);

  std::ostringstream out;
  write_matrix_csv(m, out);
  REQUIRE(out.str() ==
          "target,sA,sB\n"
          "tX,0.25,0.5\n"
          "tY,0.75,1\n");
}
