// promptkit: induce discrete prompts from language models, evaluate how they
// transfer across models, and analyze their properties.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "promptkit/promptkit.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitData = 3;
constexpr int kExitAdapter = 4;

int exit_code(const promptkit::Error& e) {
  switch (e.category()) {
    case promptkit::ErrorCategory::validation: return kExitValidation;
    case promptkit::ErrorCategory::data: return kExitData;
    case promptkit::ErrorCategory::adapter: return kExitAdapter;
  }
  return kExitOther;
}

struct CommonArgs {
  std::string config_path;
  std::string seed;
  std::string out;
};

promptkit::RunConfig load_config(const CommonArgs& args) {
  auto cfg = promptkit::RunConfig::from_file(args.config_path);
  if (!args.seed.empty()) cfg.set("seed", args.seed);
  if (!args.out.empty()) cfg.set("out", args.out);
  return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "run configuration file")
      ->required();
  sub->add_option("--seed", args.seed, "override the root seed");
  sub->add_option("--out", args.out, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete prompt induction, transfer evaluation and analysis"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string command;
  for (const auto& name : {"induce", "evaluate", "transfer-matrix", "analyze",
                           "ensemble", "baseline"}) {
    auto* sub = app.add_subcommand(name);
    add_common(sub, args);
    sub->callback([&command, name]() { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    auto cfg = load_config(args);
    if (command == "induce") return promptkit::cmd::cmd_induce(std::move(cfg));
    if (command == "evaluate")
      return promptkit::cmd::cmd_evaluate(std::move(cfg), false);
    if (command == "transfer-matrix")
      return promptkit::cmd::cmd_evaluate(std::move(cfg), true);
    if (command == "analyze")
      return promptkit::cmd::cmd_analyze(std::move(cfg));
    if (command == "ensemble")
      return promptkit::cmd::cmd_ensemble(std::move(cfg));
    if (command == "baseline")
      return promptkit::cmd::cmd_baseline(std::move(cfg));
    std::cerr << "error: unknown command\n";
    return kExitOther;
  } catch (const promptkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
