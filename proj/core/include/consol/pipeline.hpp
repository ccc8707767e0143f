#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consol/analysis.hpp"
#include "consol/config.hpp"
#include "consol/evaluation.hpp"
#include "consol/provider.hpp"

namespace consol::pipeline {

struct ProviderSet {
  std::shared_ptr<Provider> assistant;
  std::shared_ptr<Provider> judge;
  std::shared_ptr<Provider> base_model;
};

/// Replay mode serves all three roles from config.fixtures_dir. Live mode
/// builds HTTP providers; a role without cache_dir caches under
/// <run_dir>/cache/<role>.
ProviderSet make_providers(const RunConfig& config, const std::filesystem::path& run_dir);

enum class StageStatus { kCompleted, kAlreadyComplete };

/// Run directory layout:
///   config.resolved.json, prompts.json, stages/<stage>.done
///   ingest/{conversations/<id>.json, questions.jsonl, validation.json}
///   compact/<id>/cycle_<i>/...
///   reflect/<id>/facts.jsonl
///   synthesize/<id>/{training_set.jsonl, manifest.json, example_counts.json}
///   train/<id>/{questions.jsonl, out/answers_epoch_<e>.jsonl, out/ce_epoch_<e>.jsonl}
///   eval/<condition>/{answers.jsonl, judgments.jsonl}
///   analysis/analysis.json, report/...
class Runner {
 public:
  Runner(RunConfig config, std::filesystem::path run_dir, ProviderSet providers);

  /// `conversation_filter` restricts the run to the listed ids.
  StageStatus ingest(std::span<const std::string> conversation_filter = {});
  StageStatus compact();
  StageStatus reflect();
  StageStatus synthesize();
  StageStatus train();
  StageStatus evaluate(const evaluation::Condition& condition);
  StageStatus analyze();
  StageStatus report();

  /// ingest, compact, reflect, synthesize, train, every planned condition,
  /// analyze, report. Completed stages are skipped.
  void run_all(std::span<const std::string> conversation_filter = {});

  /// no_context, compaction-1..k, consolidated epochs, full_context.
  std::vector<evaluation::Condition> planned_conditions() const;

  /// Expands "all", "compaction" and "consolidated" to planned conditions;
  /// anything else goes through Condition::parse.
  std::vector<evaluation::Condition> expand_condition(std::string_view text) const;

  bool is_complete(std::string_view stage) const;
  std::filesystem::path marker_path(std::string_view stage) const;

  analysis::AnalysisInputs analysis_inputs() const;

  const std::filesystem::path& run_dir() const { return run_dir_; }
  const RunConfig& config() const { return config_; }

 private:
  void capture_config() const;
  void require(std::string_view stage) const;
  void mark(std::string_view stage, const json& summary) const;
  std::vector<Conversation> conversations() const;
  std::vector<TestQuestion> questions() const;

  RunConfig config_;
  std::filesystem::path run_dir_;
  ProviderSet providers_;
};

}  // namespace consol::pipeline
