#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptkit/analysis.hpp"
#include "promptkit/autoprompt.hpp"
#include "promptkit/config.hpp"
#include "promptkit/corpus.hpp"
#include "promptkit/eval.hpp"
#include "promptkit/lpaqa.hpp"
#include "promptkit/manifest.hpp"
#include "promptkit/optiprompt.hpp"
#include "promptkit/prompt_store.hpp"
#include "promptkit/registry.hpp"

namespace promptkit {

namespace cmd {

namespace fs = std::filesystem;

struct LoadedData {
  std::vector<RelationSpec> relations;
  RelationFacts train;
  RelationFacts test;
  VocabSet vocab;
  std::map<std::string, std::string> digests;
  std::size_t record_errors = 0;
};

inline RelationFacts load_relation_dir(
    const std::string& dir, const std::vector<RelationSpec>& relations,
    std::map<std::string, std::string>& digests, std::size_t& record_errors,
    std::ostream& log) {
  RelationFacts out;
  for (const auto& spec : relations) {
    const std::string path = dir + "/" + spec.relation_id + ".jsonl";
    const FactLoadResult loaded = load_facts(path, spec.relation_id);
    for (const auto& err : loaded.errors)
      log << "warning: " << path << ":" << err.line_number << ": "
          << err.reason << "\n";
    record_errors += loaded.errors.size();
    digests[path] = file_digest(path);
    out[spec.relation_id] = loaded.facts;
  }
  return out;
}

// Common vocabulary: an explicit file wins; otherwise it is intersected from
// `vocab_models` (falling back to every model named in the config).
inline VocabSet resolve_vocab(const RunConfig& cfg,
                              const std::vector<std::string>& default_models,
                              std::map<std::string, std::string>& digests) {
  if (const auto path = cfg.get("vocab"); path && !path->empty()) {
    digests[*path] = file_digest(*path);
    return load_vocab(*path);
  }
  std::vector<std::string> model_ids = cfg.get_list("vocab_models");
  if (model_ids.empty()) model_ids = default_models;
  if (model_ids.empty())
    throw ValidationError("config needs `vocab` or `vocab_models`");
  std::vector<std::vector<std::string>> lists;
  for (const auto& id : model_ids)
    lists.push_back(resolve_model(id)->surface_vocabulary());
  return build_common_vocab(lists, model_ids);
}

inline LoadedData load_data(const RunConfig& cfg,
                            const std::vector<std::string>& vocab_models,
                            bool need_train, bool need_test,
                            std::ostream& log) {
  LoadedData data;
  const std::string relations_path = cfg.require("relations");
  data.relations = load_relations(relations_path);
  data.digests[relations_path] = file_digest(relations_path);
  if (data.relations.empty())
    throw DataError("no relations in " + relations_path);

  data.vocab = resolve_vocab(cfg, vocab_models, data.digests);

  if (need_train) {
    const RelationFacts raw = load_relation_dir(
        cfg.require("train_dir"), data.relations, data.digests,
        data.record_errors, log);
    data.train = filter_facts(raw, data.vocab);
  }
  if (need_test) {
    RelationFacts raw = load_relation_dir(cfg.require("test_dir"),
                                          data.relations, data.digests,
                                          data.record_errors, log);
    if (cfg.get_or("uhn_filter", "false") == "true")
      for (auto& [rel, facts] : raw) facts = uhn_substring_filter(facts);
    data.test = filter_facts(raw, data.vocab);
  }
  return data;
}

inline std::string out_dir(const RunConfig& cfg) {
  const std::string out = cfg.require("out");
  fs::create_directories(out);
  return out;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
}

inline nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json j;
  j["micro_average"] = report.micro_average;
  j["correct"] = report.correct;
  j["scored"] = report.scored;
  j["skipped"] = report.skipped;
  j["total"] = report.total;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [rel, s] : report.per_relation) {
    per[rel] = {{"correct", s.correct},
                {"scored", s.scored},
                {"skipped", s.skipped},
                {"accuracy", s.accuracy}};
  }
  j["per_relation"] = std::move(per);
  return j;
}

// label=path pairs from `stores`, or a single unlabeled `store`.
inline std::map<std::string, std::string> store_paths(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& entry : cfg.get_list("stores")) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ValidationError("stores entries must be label=path: " + entry);
    out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  if (out.empty()) {
    if (const auto single = cfg.get("store"); single && !single->empty())
      out["store"] = *single;
  }
  if (out.empty())
    throw ValidationError("config needs `store` or `stores`");
  return out;
}

// Distribution providers for one prompt store on one target model. Soft
// stores load their vector blobs; a dimension mismatch propagates as
// DimensionMismatchError for the caller to handle per cell.
inline std::map<std::string, DistributionProvider> store_providers(
    const PromptStore& store, const std::string& store_dir,
    const LanguageModel& target, std::shared_ptr<const VocabIndex> index) {
  std::map<std::string, DistributionProvider> providers;
  for (const auto& [rel, rec] : store.records) {
    if (!rec.soft_blob.empty()) {
      const SoftPrompt soft =
          load_soft_prompt(store_dir + "/" + rec.soft_blob);
      auto provider =
          std::make_shared<SoftPromptProvider>(soft, target);
      providers[rel] = [provider, index](const std::string& subject) {
        return provider->distribution(subject, *index);
      };
    } else {
      const PromptTemplate tpl = rec.prompt;
      const LanguageModel* lm = &target;
      providers[rel] = [lm, tpl, index](const std::string& subject) {
        return predict_object_distribution(*lm, render(*lm, tpl, subject),
                                           *index);
      };
    }
  }
  return providers;
}

// ---------------------------------------------------------------------------
// induce
// ---------------------------------------------------------------------------

inline int cmd_induce(RunConfig cfg, std::ostream& log = std::cerr) {
  const std::string method = cfg.require("method");
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const std::string out = out_dir(cfg);

  std::string generator_id, evaluator_id;
  if (method == "autoprompt" || method == "optiprompt" || method == "lpaqa") {
    generator_id = evaluator_id = cfg.require("model");
  } else if (method == "mixed") {
    generator_id = cfg.require("generator");
    if (!cfg.has("evaluator") || cfg.require("evaluator").empty())
      throw ValidationError("config is missing required field: evaluator");
    evaluator_id = cfg.require("evaluator");
  } else if (method != "manual") {
    throw ValidationError("unknown method: " + method);
  }

  std::vector<std::string> vocab_models;
  if (!generator_id.empty()) vocab_models.push_back(generator_id);
  if (!evaluator_id.empty() && evaluator_id != generator_id)
    vocab_models.push_back(evaluator_id);

  LoadedData data = load_data(cfg, vocab_models, method != "manual",
                              /*need_test=*/false, log);

  PromptStore store;
  store.method = method;
  store.generator_id = generator_id;
  store.evaluator_id = evaluator_id;
  store.seed = seed;
  store.config_digest = cfg.digest();

  if (method == "manual") {
    for (const auto& spec : data.relations) {
      PromptRecord rec;
      rec.relation_id = spec.relation_id;
      rec.prompt = PromptTemplate::parse(spec.manual_template);
      store.records.emplace(spec.relation_id, std::move(rec));
    }
  } else if (method == "autoprompt" || method == "mixed") {
    const auto generator = resolve_model(generator_id);
    const auto evaluator = resolve_model(evaluator_id);
    SearchConfig sc;
    sc.num_tokens = cfg.get_u64("search.num_tokens", 5);
    sc.iterations = cfg.get_u64("search.iterations", 1000);
    sc.candidates_per_step = cfg.get_u64("search.candidates", 10);
    sc.batch_size_generate = cfg.get_u64("search.batch_generate", 16);
    sc.batch_size_evaluate = cfg.get_u64("search.batch_evaluate", 16);
    sc.search_vocab = cfg.get_or("search.vocab", "common") == "model_native"
                          ? SearchVocabMode::model_native
                          : SearchVocabMode::common;
    sc.init = cfg.get_or("search.init", "filler") == "random"
                  ? TriggerInit::random
                  : TriggerInit::filler;
    for (const auto& spec : data.relations) {
      const auto& train = data.train[spec.relation_id];
      if (train.empty())
        throw DataError("no usable training facts for " + spec.relation_id);
      sc.seed = substream_seed(seed, "induce:" + spec.relation_id);
      InduceTrace trace;
      const DiscretePrompt prompt =
          induce(*generator, *evaluator, spec.relation_id, train, sc,
                 &data.vocab, &trace);
      PromptRecord rec;
      rec.relation_id = spec.relation_id;
      rec.prompt = prompt.to_template();
      rec.train_score = trace.final_train_score;
      rec.eval_score = trace.best_eval_score;
      store.records.emplace(spec.relation_id, std::move(rec));
    }
  } else if (method == "optiprompt") {
    const auto model = resolve_model(generator_id);
    SoftTrainConfig tc;
    if (cfg.has("opti.lr")) tc.learning_rate = cfg.get_double("opti.lr", 0.0);
    tc.epochs = cfg.get_u64("opti.epochs", 20);
    tc.length = cfg.get_u64("opti.length", 5);
    tc.batch_size = cfg.get_u64("opti.batch", 16);
    tc.init = soft_init_from_string(cfg.get_or("opti.init", "random"));
    for (const auto& spec : data.relations) {
      const auto& train = data.train[spec.relation_id];
      if (train.empty())
        throw DataError("no usable training facts for " + spec.relation_id);
      tc.seed = substream_seed(seed, "opti:" + spec.relation_id);
      if (tc.init == SoftInit::manual_template)
        tc.manual_template = spec.manual_template;
      const SoftTrainResult trained =
          train_soft(*model, spec.relation_id, train, tc);
      const std::string blob = spec.relation_id + ".softprompt";
      save_soft_prompt(trained.prompt, out + "/" + blob);
      PromptRecord rec;
      rec.relation_id = spec.relation_id;
      rec.prompt = detail_soft::placeholder_template(*model, tc.length);
      rec.soft_blob = blob;
      rec.train_score = -trained.epoch_losses.back();
      rec.eval_score = -trained.epoch_losses.back();
      store.records.emplace(spec.relation_id, std::move(rec));
    }
  } else if (method == "lpaqa") {
    const auto model = resolve_model(generator_id);
    const std::string pools_dir = cfg.require("pools_dir");
    for (const auto& spec : data.relations) {
      const auto& train = data.train[spec.relation_id];
      if (train.empty())
        throw DataError("no usable training facts for " + spec.relation_id);
      const CandidatePool pool = load_candidate_pool(
          pools_dir + "/" + spec.relation_id + ".txt", spec.relation_id);
      const PromptTemplate best =
          select_top1(pool, *model, train, data.vocab);
      RelationFacts train_map{{spec.relation_id, train}};
      PromptRecord rec;
      rec.relation_id = spec.relation_id;
      rec.prompt = best;
      rec.eval_score = precision_at_1(*model, {{spec.relation_id, best}},
                                      train_map, data.vocab)
                           .micro_average;
      store.records.emplace(spec.relation_id, std::move(rec));
    }
  }

  save_prompt_store(store, out + "/prompt_store.json");
  save_vocab(data.vocab, out + "/vocab.txt");

  RunManifest manifest;
  manifest.command = "induce";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.model_ids = vocab_models;
  manifest.dataset_digests = data.digests;
  manifest.outputs = {"prompt_store.json", "vocab.txt"};
  if (data.record_errors)
    manifest.notes["record_errors"] = std::to_string(data.record_errors);
  manifest.save(out + "/manifest-induce.json");
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate / transfer-matrix
// ---------------------------------------------------------------------------

struct GridResult {
  TransferMatrix grid;
  std::map<std::string, std::string> flagged_cells;  // "target|source" -> why
};

inline GridResult evaluate_grid(
    const std::map<std::string, PromptStore>& stores,
    const std::map<std::string, std::string>& store_dirs,
    const std::vector<LMHandlePtr>& targets, const RelationFacts& test,
    const VocabSet& vocab) {
  GridResult result;
  for (const auto& [label, _] : stores) result.grid.sources.push_back(label);
  for (const auto& t : targets)
    result.grid.targets.push_back(t->info().model_id);
  result.grid.cells = Matrix(targets.size(), stores.size());
  result.grid.skipped_facts = Matrix(targets.size(), stores.size());

  const std::size_t n_facts = total_facts(test);
  for (std::size_t row = 0; row < targets.size(); ++row) {
    auto index = std::make_shared<const VocabIndex>(*targets[row], vocab);
    std::size_t col = 0;
    for (const auto& [label, store] : stores) {
      try {
        const auto providers = store_providers(store, store_dirs.at(label),
                                                *targets[row], index);
        const EvalReport report =
            precision_at_1_providers(providers, test, vocab);
        result.grid.cells(row, col) = report.micro_average;
        result.grid.skipped_facts(row, col) =
            static_cast<double>(report.skipped);
      } catch (const DimensionMismatchError& e) {
        result.grid.cells(row, col) = 0.0;
        result.grid.skipped_facts(row, col) = static_cast<double>(n_facts);
        result.flagged_cells[result.grid.targets[row] + "|" + label] =
            e.what();
      }
      ++col;
    }
  }
  return result;
}

inline int cmd_evaluate(RunConfig cfg, bool with_transfer_analysis,
                        std::ostream& log = std::cerr) {
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const std::string out = out_dir(cfg);

  const auto paths = store_paths(cfg);
  std::map<std::string, PromptStore> stores;
  std::map<std::string, std::string> store_dirs;
  std::map<std::string, std::string> digests;
  for (const auto& [label, path] : paths) {
    stores[label] = load_prompt_store(path);
    const std::string dir = fs::path(path).parent_path().string();
    store_dirs[label] = dir.empty() ? "." : dir;
    digests[path] = file_digest(path);
  }

  const auto target_ids = cfg.get_list("targets");
  if (target_ids.empty())
    throw ValidationError("config is missing required field: targets");
  std::vector<LMHandlePtr> targets;
  for (const auto& id : target_ids) targets.push_back(resolve_model(id));

  LoadedData data = load_data(cfg, target_ids, /*need_train=*/false,
                              /*need_test=*/true, log);
  for (auto& [k, v] : digests) data.digests[k] = v;

  const GridResult result =
      evaluate_grid(stores, store_dirs, targets, data.test, data.vocab);

  std::vector<std::string> outputs;

  // Per-cell reports for single-store evaluation; matrix CSVs always.
  {
    std::ofstream csv(out + "/transfer_matrix.csv", std::ios::binary);
    csv.precision(17);
    write_matrix_csv(result.grid, csv);
    outputs.push_back("transfer_matrix.csv");
  }

  nlohmann::json summary;
  summary["schema"] = "promptkit/eval-summary/v1";
  summary["config_digest"] = cfg.digest();
  summary["seed"] = seed;
  summary["sources"] = result.grid.sources;
  summary["targets"] = result.grid.targets;
  if (!result.flagged_cells.empty())
    summary["flagged_cells"] = result.flagged_cells;

  nlohmann::json cells = nlohmann::json::object();
  for (std::size_t row = 0; row < result.grid.targets.size(); ++row)
    for (std::size_t col = 0; col < result.grid.sources.size(); ++col)
      cells[result.grid.targets[row] + "|" + result.grid.sources[col]] = {
          {"accuracy", result.grid.cells(row, col)},
          {"skipped_facts", result.grid.skipped_facts(row, col)}};
  summary["cells"] = std::move(cells);

  if (stores.size() == 1 && targets.size() == 1 &&
      result.flagged_cells.empty()) {
    auto index = std::make_shared<const VocabIndex>(*targets[0], data.vocab);
    const auto& [label, store] = *stores.begin();
    const auto providers =
        store_providers(store, store_dirs.at(label), *targets[0], index);
    const EvalReport report =
        precision_at_1_providers(providers, data.test, data.vocab);
    nlohmann::json rj = report_json(report);
    rj["schema"] = "promptkit/eval-report/v1";
    rj["model_id"] = targets[0]->info().model_id;
    rj["prompt_set"] = label;
    rj["config_digest"] = cfg.digest();
    rj["seed"] = seed;
    write_json(rj, out + "/eval_report.json");
    outputs.push_back("eval_report.json");
  }

  if (with_transfer_analysis) {
    // Same-source accuracies come from grid diagonal cells where a target's
    // own prompt set is present; `same_source` config pairs fill the rest.
    std::map<std::string, double> same_source =
        diagonal_accuracies(result.grid);
    for (const auto& entry : cfg.get_list("same_source")) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos)
        throw ValidationError("same_source entries must be target=path: " +
                              entry);
      const std::string target_id = entry.substr(0, eq);
      const PromptStore own = load_prompt_store(entry.substr(eq + 1));
      const auto target = resolve_model(target_id);
      auto index = std::make_shared<const VocabIndex>(*target, data.vocab);
      const std::string own_dir =
          fs::path(entry.substr(eq + 1)).parent_path().string();
      const auto providers = store_providers(
          own, own_dir.empty() ? "." : own_dir, *target, index);
      same_source[target->info().model_id] =
          precision_at_1_providers(providers, data.test, data.vocab)
              .micro_average;
    }

    std::vector<std::string> missing;
    for (const auto& target : result.grid.targets)
      if (!same_source.count(target)) missing.push_back(target);

    if (!missing.empty()) {
      std::string note = "relative analysis skipped; no same-source prompt "
                         "set for:";
      for (const auto& t : missing) note += " " + t;
      summary["relative_analysis"] = note;
    } else {
      const TransferMatrix relative =
          relative_matrix(result.grid, same_source);
      {
        std::ofstream csv(out + "/relative_matrix.csv", std::ios::binary);
        csv.precision(17);
        write_matrix_csv(relative, csv);
        outputs.push_back("relative_matrix.csv");
      }

      nlohmann::json drops = nlohmann::json::object();
      std::map<std::string, std::uint64_t> source_sizes;
      for (const auto& label : relative.sources) {
        nlohmann::json d;
        d["excluding_diagonal"] = generalization_drop(relative, label);
        d["including_diagonal"] = column_mean(relative, label, true);
        drops[label] = std::move(d);
        const std::string gen = stores.at(label).generator_id;
        if (!gen.empty())
          source_sizes[label] = resolve_model(gen)->info().parameter_count;
      }
      summary["generalization_drop"] = std::move(drops);
      if (source_sizes.size() >= 3) {
        try {
          summary["drop_size_correlation"] =
              drop_size_correlation(relative, source_sizes);
        } catch (const ValidationError&) {
          summary["drop_size_correlation"] = nullptr;
        }
      }

      // Mixture quality: correlate each mixed set's mean grid accuracy with
      // the partner model's same-source accuracy, per fixed generator or
      // evaluator, whenever at least 3 pairs share the fixed model.
      std::map<ModelPair, double> mixture_acc;
      for (const auto& [label, store] : stores) {
        if (store.generator_id.empty() || store.evaluator_id.empty()) continue;
        const std::string gen =
            resolve_model(store.generator_id)->info().model_id;
        const std::string ev =
            resolve_model(store.evaluator_id)->info().model_id;
        if (gen == ev) continue;
        mixture_acc[{gen, ev}] = column_mean(result.grid, label, true);
      }
      nlohmann::json mix_corr = nlohmann::json::object();
      for (const MixtureRole role :
           {MixtureRole::generator, MixtureRole::evaluator}) {
        std::map<std::string, std::map<ModelPair, double>> groups;
        for (const auto& [pair, acc] : mixture_acc) {
          const std::string& fixed =
              role == MixtureRole::generator ? pair.first : pair.second;
          groups[fixed][pair] = acc;
        }
        for (const auto& [fixed, pairs] : groups) {
          if (pairs.size() < 3) continue;
          try {
            const double r =
                mixture_quality_correlation(same_source, pairs, role);
            const std::string key =
                (role == MixtureRole::generator ? "generator=" : "evaluator=") +
                fixed;
            mix_corr[key] = r;
          } catch (const ValidationError&) {
            // partner accuracy missing or degenerate series; omit the entry
          }
        }
      }
      if (!mix_corr.empty())
        summary["mixture_quality_correlation"] = std::move(mix_corr);
    }
  }

  write_json(summary, out + "/eval_summary.json");
  outputs.push_back("eval_summary.json");

  RunManifest manifest;
  manifest.command = with_transfer_analysis ? "transfer-matrix" : "evaluate";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.model_ids = target_ids;
  manifest.dataset_digests = data.digests;
  manifest.outputs = outputs;
  manifest.save(out + "/manifest-" + manifest.command + ".json");
  return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

inline int cmd_analyze(RunConfig cfg, std::ostream& log = std::cerr) {
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const std::string out = out_dir(cfg);

  const auto paths = store_paths(cfg);
  const std::string wordlist_path = cfg.require("analysis.wordlist");
  const auto wordlist = load_wordlist(
      wordlist_path, cfg.get_u64("analysis.min_freq", 1000));
  const std::size_t repeats = cfg.get_u64("analysis.repeats", 10);

  LoadedData data = load_data(cfg, {}, /*need_train=*/false,
                              /*need_test=*/true, log);
  data.digests[wordlist_path] = file_digest(wordlist_path);

  std::map<std::string, PromptTemplate> manual;
  for (const auto& spec : data.relations)
    manual.emplace(spec.relation_id,
                   PromptTemplate::parse(spec.manual_template));

  const NgramEmbedder embedder;
  std::vector<std::string> outputs;
  std::vector<std::string> model_ids;

  for (const auto& [label, path] : paths) {
    const PromptStore store = load_prompt_store(path);
    data.digests[path] = file_digest(path);
    if (store.records.empty())
      throw ValidationError("prompt store " + label + " is empty");
    const auto prompts = store.templates();

    // Probes run against the model that trained the prompts.
    const std::string model_id =
        cfg.get_or("analysis.model", store.generator_id);
    if (model_id.empty())
      throw ValidationError("prompt store " + label +
                            " names no generator; set analysis.model");
    const auto model = resolve_model(model_id);
    model_ids.push_back(model_id);

    AnalysisReport report;
    report.prompt_set_id = label;
    report.overlap_tscore = semantic_overlap_tscore(
        prompts, manual, [&embedder](const std::string& s) {
          return embedder(s);
        });
    std::vector<PromptTemplate> templates;
    for (const auto& [rel, tpl] : prompts) templates.push_back(tpl);
    report.real_word_ratio = real_word_ratio(templates, wordlist);
    report.shuffle = shuffle_accuracy(*model, prompts, data.test, data.vocab,
                                      repeats, seed);
    report.deletion =
        token_deletion_sweep(*model, prompts, data.test, data.vocab);

    nlohmann::json j;
    j["schema"] = "promptkit/analysis-report/v1";
    j["prompt_set_id"] = label;
    j["model_id"] = model_id;
    j["overlap_tscore"] = report.overlap_tscore;
    j["real_word_ratio"] = report.real_word_ratio;
    j["shuffle"] = {{"baseline_accuracy", report.shuffle.baseline_accuracy},
                    {"mean_accuracy", report.shuffle.mean_accuracy},
                    {"std_accuracy", report.shuffle.std_accuracy},
                    {"mean_ratio", report.shuffle.mean_ratio},
                    {"std_ratio", report.shuffle.std_ratio},
                    {"repeats", report.shuffle.repeats}};
    j["deletion"] = {{"per_position", report.deletion.per_position},
                     {"full_sequence", report.deletion.full_sequence}};
    j["config_digest"] = cfg.digest();
    j["seed"] = seed;
    const std::string name = "analysis-" + label + ".json";
    write_json(j, out + "/" + name);
    outputs.push_back(name);
  }

  RunManifest manifest;
  manifest.command = "analyze";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.model_ids = model_ids;
  manifest.dataset_digests = data.digests;
  manifest.outputs = outputs;
  manifest.save(out + "/manifest-analyze.json");
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

inline int cmd_ensemble(RunConfig cfg, std::ostream& log = std::cerr) {
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const std::string out = out_dir(cfg);
  const std::string model_id = cfg.require("model");
  const std::string pools_dir = cfg.require("pools_dir");
  const auto model = resolve_model(model_id);

  LoadedData data = load_data(cfg, {model_id}, /*need_train=*/true,
                              /*need_test=*/true, log);

  EnsembleTrainConfig tc;
  tc.learning_rate = cfg.get_double("ensemble.lr", 1.0);
  tc.epochs = cfg.get_u64("ensemble.epochs", 100);

  auto index = std::make_shared<const VocabIndex>(*model, data.vocab);
  std::map<std::string, DistributionProvider> providers;
  nlohmann::json per_relation = nlohmann::json::object();
  std::vector<std::string> outputs;

  std::map<std::string, CandidatePool> pools;
  std::map<std::string, EnsembleWeights> weights;
  for (const auto& spec : data.relations) {
    const auto& rel = spec.relation_id;
    const CandidatePool pool =
        load_candidate_pool(pools_dir + "/" + rel + ".txt", rel);
    tc.seed = substream_seed(seed, "ensemble:" + rel);
    const EnsembleTrainResult trained =
        ensemble_optimize(pool, *model, data.train[rel], tc);
    const std::string wpath = rel + ".weights.txt";
    save_ensemble_weights(trained.weights, out + "/" + wpath);
    outputs.push_back(wpath);
    per_relation[rel] = {
        {"initial_objective", trained.epoch_objectives.front()},
        {"final_objective", trained.epoch_objectives.back()},
        {"weights_file", wpath}};
    pools.emplace(rel, pool);
    weights.emplace(rel, trained.weights);
  }

  for (const auto& spec : data.relations) {
    const auto& rel = spec.relation_id;
    const CandidatePool& pool = pools.at(rel);
    const EnsembleWeights& w = weights.at(rel);
    providers[rel] = [&model, pool, w, index, rel](const std::string& subject) {
      Fact probe{subject, rel, ""};
      return ensemble_predict(pool, w, *model, probe, *index);
    };
  }

  const EvalReport report =
      precision_at_1_providers(providers, data.test, data.vocab);

  nlohmann::json j = report_json(report);
  j["schema"] = "promptkit/ensemble-report/v1";
  j["model_id"] = model_id;
  j["per_relation_training"] = std::move(per_relation);
  j["config_digest"] = cfg.digest();
  j["seed"] = seed;
  write_json(j, out + "/ensemble_report.json");
  outputs.push_back("ensemble_report.json");

  RunManifest manifest;
  manifest.command = "ensemble";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.model_ids = {model_id};
  manifest.dataset_digests = data.digests;
  manifest.outputs = outputs;
  manifest.save(out + "/manifest-ensemble.json");
  return 0;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

inline int cmd_baseline(RunConfig cfg, std::ostream& log = std::cerr) {
  const std::uint64_t seed = cfg.get_u64("seed", 0);
  const std::string out = out_dir(cfg);

  LoadedData data = load_data(cfg, {}, /*need_train=*/true,
                              /*need_test=*/true, log);

  const double accuracy = majority_baseline(data.train, data.test);

  nlohmann::json j;
  j["schema"] = "promptkit/baseline-report/v1";
  j["accuracy"] = accuracy;
  j["train_facts"] = total_facts(data.train);
  j["test_facts"] = total_facts(data.test);
  j["config_digest"] = cfg.digest();
  j["seed"] = seed;
  write_json(j, out + "/baseline_report.json");

  RunManifest manifest;
  manifest.command = "baseline";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.dataset_digests = data.digests;
  manifest.outputs = {"baseline_report.json"};
  manifest.save(out + "/manifest-baseline.json");
  log << "majority baseline accuracy: " << accuracy << "\n";
  return 0;
}

}  // namespace cmd

}  // namespace promptkit
