#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "consol/compaction.hpp"
#include "consol/corpus.hpp"
#include "consol/evaluation.hpp"
#include "consol/provider.hpp"
#include "consol/reflection.hpp"
#include "consol/synthesis.hpp"

namespace consol {

enum class ProviderMode { kLive, kReplay };

ProviderMode parse_provider_mode(std::string_view text);
std::string_view to_string(ProviderMode mode);

struct RoleConfig {
  std::string model_tag;
  ProviderConfig provider;
};

struct TrainerConfig {
  /// Executable and leading arguments; the stage appends training set,
  /// manifest, questions file and output directory.
  std::vector<std::string> command;
  /// Directory of pre-generated trainer outputs, one sub-directory per
  /// conversation (answers_epoch_<e>.jsonl, ce_epoch_<e>.jsonl). Used when
  /// no command is configured.
  std::filesystem::path outputs_dir;
};

/// Declarative run configuration. Every protocol constant (3 passes, 20
/// paraphrases, 6:1 ratio, 3 cycles, 8 epochs, 512 answer tokens) is a
/// default here and can be overridden in the config file.
struct RunConfig {
  std::filesystem::path corpus_dir;
  std::filesystem::path questions_file;
  std::filesystem::path fixtures_dir;
  ProviderMode provider_mode = ProviderMode::kLive;

  RoleConfig assistant;   // reflection, synthesis, summaries, continuations
  RoleConfig judge;
  RoleConfig base_model;  // model under test for no/full/compaction conditions

  reflection::Options reflection;
  synthesis::Options synthesis;
  compaction::Options compaction;
  evaluation::Options evaluation;
  Manifest manifest;
  /// Consolidated epochs to evaluate (1..epochs_sweep); 0 evaluates only
  /// manifest.epochs.
  int epochs_sweep = 0;
  TrainerConfig trainer;
  int max_parallel = 4;

  /// Parses a config file; relative paths resolve against its directory.
  /// Unknown keys and invalid values raise config errors.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const json& j, const std::filesystem::path& base_dir);

  /// Fully resolved form written into every run directory.
  json to_json() const;

  /// Consolidated epochs evaluated by run-all.
  std::vector<int> consolidated_epochs() const;
};

}  // namespace consol
