#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "promptkit/corpus.hpp"
#include "promptkit/lm.hpp"
#include "promptkit/stats.hpp"

namespace promptkit {

struct RelationScore {
  std::size_t correct = 0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  double accuracy = 0.0;  // correct / (scored + skipped)
};

// Micro-averaged precision@1. Facts that cannot be rendered on the model are
// skipped-and-counted, and count as incorrect (the pessimistic reading: a
// prompt that does not even render certainly did not retrieve the fact).
struct EvalReport {
  std::map<std::string, RelationScore> per_relation;
  std::size_t correct = 0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  std::size_t total = 0;
  double micro_average = 0.0;  // correct / total
};

// Produces the answer-slot distribution for one subject; throws AdapterError
// when the underlying prompt cannot be rendered for it.
using DistributionProvider =
    std::function<TokenDistribution(const std::string& subject)>;

inline EvalReport precision_at_1_providers(
    const std::map<std::string, DistributionProvider>& providers,
    const RelationFacts& test, const VocabSet& vocab) {
  EvalReport report;
  for (const auto& [relation, facts] : test) {
    const auto provider = providers.find(relation);
    if (provider == providers.end())
      throw ValidationError("no prompt for relation " + relation);
    RelationScore score;
    for (const Fact& fact : facts) {
      TokenDistribution dist;
      try {
        dist = provider->second(fact.subject);
      } catch (const AdapterError&) {
        ++score.skipped;
        continue;
      }
      ++score.scored;
      const auto top = dist.argmax();
      if (top && vocab.token(*top) == fact.object) ++score.correct;
    }
    const std::size_t n = score.scored + score.skipped;
    score.accuracy = n ? static_cast<double>(score.correct) / n : 0.0;
    report.correct += score.correct;
    report.scored += score.scored;
    report.skipped += score.skipped;
    report.per_relation.emplace(relation, score);
  }
  report.total = report.scored + report.skipped;
  report.micro_average =
      report.total ? static_cast<double>(report.correct) / report.total : 0.0;
  return report;
}

inline std::map<std::string, DistributionProvider> template_providers(
    const LanguageModel& lm,
    const std::map<std::string, PromptTemplate>& prompts,
    std::shared_ptr<const VocabIndex> index) {
  std::map<std::string, DistributionProvider> providers;
  for (const auto& [relation, tpl] : prompts) {
    providers[relation] = [&lm, tpl, index](const std::string& subject) {
      return predict_object_distribution(lm, render(lm, tpl, subject), *index);
    };
  }
  return providers;
}

// A fact counts as correct iff the argmax of the restricted answer
// distribution equals the gold object.
inline EvalReport precision_at_1(const LanguageModel& lm,
                                 const std::map<std::string, PromptTemplate>&
                                     prompts,
                                 const RelationFacts& test,
                                 const VocabSet& vocab) {
  auto index = std::make_shared<const VocabIndex>(lm, vocab);
  return precision_at_1_providers(template_providers(lm, prompts, index), test,
                                  vocab);
}

// ---------------------------------------------------------------------------
// Transfer matrices
// ---------------------------------------------------------------------------

// Accuracy grid indexed by (target model, source prompt set). Also reused
// for relative matrices, whose cells are accuracy differences.
struct TransferMatrix {
  std::vector<std::string> sources;  // column ids, sorted
  std::vector<std::string> targets;  // row ids, in evaluation order
  Matrix cells;                      // rows = targets, cols = sources
  Matrix skipped_facts;              // per-cell skipped-and-counted facts

  double cell(std::size_t target_row, std::size_t source_col) const {
    return cells(target_row, source_col);
  }

  std::optional<std::size_t> source_col(const std::string& id) const {
    for (std::size_t c = 0; c < sources.size(); ++c)
      if (sources[c] == id) return c;
    return std::nullopt;
  }
};

using PromptSet = std::map<std::string, PromptTemplate>;  // relation -> prompt

// cell(t, s) = precision@1 of target t using source s's prompts. Prompts
// whose tokens do not render on a target surface as skipped fact counts in
// that cell rather than failing the whole grid.
inline TransferMatrix transfer_matrix(
    const std::map<std::string, PromptSet>& prompt_sets,
    const std::vector<LMHandlePtr>& targets, const RelationFacts& test,
    const VocabSet& vocab) {
  if (prompt_sets.empty()) throw ValidationError("no prompt sets given");
  if (targets.empty()) throw ValidationError("no target models given");

  TransferMatrix grid;
  for (const auto& [source, _] : prompt_sets) grid.sources.push_back(source);
  for (const auto& t : targets) grid.targets.push_back(t->info().model_id);
  grid.cells = Matrix(targets.size(), prompt_sets.size());
  grid.skipped_facts = Matrix(targets.size(), prompt_sets.size());

  for (std::size_t row = 0; row < targets.size(); ++row) {
    const LanguageModel& lm = *targets[row];
    std::size_t col = 0;
    for (const auto& [source, prompts] : prompt_sets) {
      const EvalReport report = precision_at_1(lm, prompts, test, vocab);
      grid.cells(row, col) = report.micro_average;
      grid.skipped_facts(row, col) = static_cast<double>(report.skipped);
      ++col;
    }
  }
  return grid;
}

// cell(t, s) = m(t, s) - accuracy(t with its own prompts). On a grid whose
// sources and targets coincide, the diagonal of the result is zero.
inline TransferMatrix relative_matrix(
    const TransferMatrix& m,
    const std::map<std::string, double>& same_source_accuracy) {
  TransferMatrix rel = m;
  for (std::size_t row = 0; row < m.targets.size(); ++row) {
    const auto it = same_source_accuracy.find(m.targets[row]);
    if (it == same_source_accuracy.end())
      throw ValidationError("no same-source accuracy for target " +
                            m.targets[row]);
    for (std::size_t col = 0; col < m.sources.size(); ++col)
      rel.cells(row, col) = m.cells(row, col) - it->second;
  }
  return rel;
}

// Same-source accuracies read off a grid whose source ids name the models
// that induced them: entry for each target that appears among the sources.
inline std::map<std::string, double> diagonal_accuracies(
    const TransferMatrix& m) {
  std::map<std::string, double> acc;
  for (std::size_t row = 0; row < m.targets.size(); ++row)
    if (const auto col = m.source_col(m.targets[row]))
      acc[m.targets[row]] = m.cells(row, *col);
  return acc;
}

// Mean of one source's column. The same-model cell is excluded by default;
// include_diagonal = true reports the all-rows average alongside it.
inline double column_mean(const TransferMatrix& m, const std::string& source,
                          bool include_diagonal) {
  const auto col = m.source_col(source);
  if (!col) throw ValidationError("unknown source: " + source);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t row = 0; row < m.targets.size(); ++row) {
    if (!include_diagonal && m.targets[row] == source) continue;
    sum += m.cells(row, *col);
    ++n;
  }
  if (n == 0) throw ValidationError("column mean over zero cells");
  return sum / static_cast<double>(n);
}

// Average accuracy change when this source's prompts run on the other
// targets, computed on a relative matrix.
inline double generalization_drop(const TransferMatrix& relative,
                                  const std::string& source) {
  return column_mean(relative, source, /*include_diagonal=*/false);
}

// Pearson correlation between per-source generalization drop and source
// model size, over sources with a known parameter count.
inline double drop_size_correlation(
    const TransferMatrix& relative,
    const std::map<std::string, std::uint64_t>& parameter_counts) {
  std::vector<double> drops, sizes;
  for (const auto& source : relative.sources) {
    const auto it = parameter_counts.find(source);
    if (it == parameter_counts.end()) continue;
    drops.push_back(generalization_drop(relative, source));
    sizes.push_back(static_cast<double>(it->second));
  }
  if (drops.size() < 3)
    throw ValidationError("need at least 3 sources with known sizes");
  return pearson_r(drops, sizes);
}

// ---------------------------------------------------------------------------
// Mixture quality
// ---------------------------------------------------------------------------

enum class MixtureRole { generator, evaluator };

using ModelPair = std::pair<std::string, std::string>;  // generator, evaluator

// Correlation between a partner model's single-setup accuracy and the
// mixture's generalization accuracy, with one model fixed in `fixed_role`
// across all pairs.
inline double mixture_quality_correlation(
    const std::map<std::string, double>& single_accuracy,
    const std::map<ModelPair, double>& mixture_accuracy,
    MixtureRole fixed_role) {
  if (mixture_accuracy.size() < 3)
    throw ValidationError("mixture correlation needs at least 3 pairs");
  std::vector<double> partner, mixture;
  for (const auto& [pair, acc] : mixture_accuracy) {
    const std::string& partner_id =
        fixed_role == MixtureRole::generator ? pair.second : pair.first;
    const auto it = single_accuracy.find(partner_id);
    if (it == single_accuracy.end())
      throw ValidationError("no single-setup accuracy for " + partner_id);
    partner.push_back(it->second);
    mixture.push_back(acc);
  }
  return pearson_r(partner, mixture);
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

// Wide layout: one row per target, one column per source.
inline void write_matrix_csv(const TransferMatrix& m, std::ostream& out) {
  out << "target";
  for (const auto& s : m.sources) out << ',' << s;
  out << '\n';
  for (std::size_t row = 0; row < m.targets.size(); ++row) {
    out << m.targets[row];
    for (std::size_t col = 0; col < m.sources.size(); ++col)
      out << ',' << m.cells(row, col);
    out << '\n';
  }
}

}  // namespace promptkit
