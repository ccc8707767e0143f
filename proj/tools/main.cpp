// consol: run-directory driven consolidation pipeline.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "consol/config.hpp"
#include "consol/error.hpp"
#include "consol/pipeline.hpp"

namespace {

using consol::pipeline::Runner;
using consol::pipeline::StageStatus;

void report_status(std::string_view stage, StageStatus status) {
  if (status == StageStatus::kAlreadyComplete) {
    std::printf("%.*s: already complete\n", static_cast<int>(stage.size()), stage.data());
  } else {
    std::printf("%.*s: done\n", static_cast<int>(stage.size()), stage.data());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory consolidation pipeline: compaction baseline, synthetic rehearsal data "
               "and retention evaluation over a run directory."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string run_dir;
  std::string config_path;
  std::optional<std::string> provider;
  std::vector<std::string> conversations;
  std::optional<std::string> condition;
  std::optional<int> epochs_sweep;
  bool verbose = false;

  app.add_option("--run-dir", run_dir, "Run directory (created if missing)")->required();
  app.add_option("--config", config_path, "Run configuration file")->required();
  app.add_option("--provider", provider, "Provider mode")
      ->check(CLI::IsMember({"live", "replay"}));
  app.add_option("--conversation", conversations, "Restrict ingest to these conversation ids");
  app.add_option("--condition", condition,
                 "Evaluation condition: no_context, full_context, compaction[-N], "
                 "consolidated[-E] or all");
  app.add_option("--epochs-sweep", epochs_sweep, "Evaluate consolidated epochs 1..k")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", verbose, "Log progress");

  auto* ingest = app.add_subcommand("ingest", "Load and validate the corpus and questions");
  auto* compact = app.add_subcommand("compact", "Run summarize/continue compaction cycles");
  auto* reflect = app.add_subcommand("reflect", "Extract the fact inventory");
  auto* synthesize = app.add_subcommand("synthesize", "Synthesize training exchanges");
  auto* train = app.add_subcommand("train", "Emit trainer inputs and run or import the trainer");
  auto* evaluate = app.add_subcommand("evaluate", "Answer and judge one or more conditions");
  evaluate->add_option("condition", condition, "Condition name");
  auto* analyze = app.add_subcommand("analyze", "Score judgments and compute statistics");
  auto* report = app.add_subcommand("report", "Write tables and CSV files");
  auto* run_all = app.add_subcommand("run-all", "Run every stage in dependency order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
  spdlog::set_pattern("[%l] %v");

  try {
    auto config = consol::RunConfig::load(config_path);
    if (provider) config.provider_mode = consol::parse_provider_mode(*provider);
    if (epochs_sweep) config.epochs_sweep = *epochs_sweep;

    auto providers = consol::pipeline::make_providers(config, run_dir);
    Runner runner(std::move(config), run_dir, std::move(providers));

    if (*ingest) report_status("ingest", runner.ingest(conversations));
    if (*compact) report_status("compact", runner.compact());
    if (*reflect) report_status("reflect", runner.reflect());
    if (*synthesize) report_status("synthesize", runner.synthesize());
    if (*train) report_status("train", runner.train());
    if (*evaluate) {
      if (!condition) {
        throw consol::Error(consol::ErrorKind::kConfig, "evaluate needs a condition");
      }
      for (const auto& c : runner.expand_condition(*condition)) {
        report_status("evaluate " + c.name(), runner.evaluate(c));
      }
    }
    if (*analyze) report_status("analyze", runner.analyze());
    if (*report) report_status("report", runner.report());
    if (*run_all) {
      runner.run_all(conversations);
      std::printf("run-all: done\n");
    }
  } catch (const consol::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(consol::to_string(e.kind())).c_str(),
                 e.what());
    return consol::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
