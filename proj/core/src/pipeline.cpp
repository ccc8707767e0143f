#include "consol/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "consol/compaction.hpp"
#include "consol/error.hpp"
#include "consol/prompts.hpp"
#include "consol/reflection.hpp"
#include "consol/synthesis.hpp"
#include "consol/trainer_io.hpp"

namespace consol::pipeline {

namespace fs = std::filesystem;
using evaluation::Condition;

namespace {

std::shared_ptr<Provider> live(const RoleConfig& role, const fs::path& run_dir,
                               std::string_view name) {
  ProviderConfig pc = role.provider;
  if (pc.endpoint_url.empty()) {
    throw Error(ErrorKind::kConfig, fmt::format("providers.{}.endpoint_url is not set", name));
  }
  if (pc.cache_dir.empty()) pc.cache_dir = run_dir / "cache" / std::string(name);
  return make_live_provider(pc);
}

std::string stage_name(const Condition& c) { return "evaluate-" + c.name(); }

std::vector<TestQuestion> questions_for(std::span<const TestQuestion> all,
                                        const std::string& conversation_id) {
  std::vector<TestQuestion> out;
  for (const auto& q : all) {
    if (q.conversation_id == conversation_id) out.push_back(q);
  }
  return out;
}

json comparable(json resolved) {
  // The provider mode may differ between invocations on the same run.
  resolved.erase("provider");
  return resolved;
}

}  // namespace

ProviderSet make_providers(const RunConfig& config, const fs::path& run_dir) {
  ProviderSet set;
  if (config.provider_mode == ProviderMode::kReplay) {
    if (config.fixtures_dir.empty()) {
      throw Error(ErrorKind::kConfig, "replay mode needs fixtures_dir");
    }
    if (!fs::is_directory(config.fixtures_dir)) {
      throw Error(ErrorKind::kConfig,
                  fmt::format("fixtures_dir {} does not exist", config.fixtures_dir.string()));
    }
    auto replay = make_replay_provider(config.fixtures_dir);
    set.assistant = set.judge = set.base_model = replay;
    return set;
  }
  set.assistant = live(config.assistant, run_dir, "assistant");
  set.judge = live(config.judge, run_dir, "judge");
  set.base_model = live(config.base_model, run_dir, "base_model");
  return set;
}

Runner::Runner(RunConfig config, fs::path run_dir, ProviderSet providers)
    : config_(std::move(config)), run_dir_(std::move(run_dir)), providers_(std::move(providers)) {}

fs::path Runner::marker_path(std::string_view stage) const {
  return run_dir_ / "stages" / fmt::format("{}.done", stage);
}

bool Runner::is_complete(std::string_view stage) const { return fs::exists(marker_path(stage)); }

void Runner::require(std::string_view stage) const {
  if (!is_complete(stage)) {
    throw Error(ErrorKind::kDependency,
                fmt::format("missing stage marker {} (run '{}' first)",
                            marker_path(stage).string(), stage));
  }
}

void Runner::mark(std::string_view stage, const json& summary) const {
  json j = summary;
  j["stage"] = stage;
  write_json_file(marker_path(stage), j);
  spdlog::info("stage {} complete", stage);
}

void Runner::capture_config() const {
  fs::create_directories(run_dir_ / "stages");
  const fs::path resolved = run_dir_ / "config.resolved.json";
  const json current = config_.to_json();
  if (fs::exists(resolved)) {
    if (comparable(read_json_file(resolved)) != comparable(current)) {
      throw Error(ErrorKind::kConfig,
                  fmt::format("{} was produced with a different config", run_dir_.string()));
    }
  } else {
    write_json_file(resolved, current);
  }
  const fs::path prompts = run_dir_ / "prompts.json";
  if (!fs::exists(prompts)) {
    json list = json::array();
    for (const auto& p : prompt_manifest()) {
      list.push_back({{"name", p.name}, {"version", p.version}, {"sha256", p.sha256}});
    }
    write_json_file(prompts, list);
  }
}

std::vector<Conversation> Runner::conversations() const {
  return load_corpus(run_dir_ / "ingest" / "conversations");
}

std::vector<TestQuestion> Runner::questions() const {
  return load_questions(run_dir_ / "ingest" / "questions.jsonl");
}

StageStatus Runner::ingest(std::span<const std::string> filter) {
  capture_config();
  if (is_complete("ingest")) return StageStatus::kAlreadyComplete;
  if (config_.corpus_dir.empty() || config_.questions_file.empty()) {
    throw Error(ErrorKind::kConfig, "corpus_dir and questions_file must be set");
  }
  auto all = load_corpus(config_.corpus_dir);
  auto questions = load_questions(config_.questions_file);

  std::vector<Conversation> selected;
  if (filter.empty()) {
    selected = std::move(all);
  } else {
    std::set<std::string> wanted(filter.begin(), filter.end());
    for (auto& c : all) {
      if (wanted.erase(c.id) > 0) selected.push_back(std::move(c));
    }
    if (!wanted.empty()) {
      throw Error(ErrorKind::kConfig,
                  fmt::format("unknown conversation id '{}'", *wanted.begin()));
    }
    std::set<std::string> ids;
    for (const auto& c : selected) ids.insert(c.id);
    std::erase_if(questions, [&](const TestQuestion& q) { return !ids.contains(q.conversation_id); });
  }
  if (selected.empty()) throw Error(ErrorKind::kConfig, "corpus is empty");

  auto report = validate_run_inputs(selected, questions);

  const fs::path dir = run_dir_ / "ingest";
  fs::remove_all(dir / "conversations");
  for (const auto& c : selected) {
    store_conversation(dir / "conversations" / (c.id + ".json"), c);
  }
  store_questions(dir / "questions.jsonl", questions);
  write_json_file(dir / "validation.json", to_json(report));
  mark("ingest", {{"conversations", selected.size()}, {"questions", questions.size()}});
  return StageStatus::kCompleted;
}

StageStatus Runner::compact() {
  capture_config();
  if (is_complete("compact")) return StageStatus::kAlreadyComplete;
  require("ingest");
  std::int64_t summaries = 0;
  for (const auto& c : conversations()) {
    auto cycles =
        compaction::run_cycles(*providers_.assistant, c, config_.compaction.cycles, config_.compaction);
    compaction::store_cycles(run_dir_ / "compact" / c.id, cycles);
    summaries += static_cast<std::int64_t>(cycles.size());
  }
  mark("compact", {{"cycles", summaries}});
  return StageStatus::kCompleted;
}

StageStatus Runner::reflect() {
  capture_config();
  if (is_complete("reflect")) return StageStatus::kAlreadyComplete;
  // The inventory covers the original plus its continuations.
  require("compact");
  std::size_t total = 0;
  for (const auto& c : conversations()) {
    auto cycles = compaction::load_cycles(run_dir_ / "compact" / c.id);
    std::vector<Conversation> continuations;
    for (auto& s : cycles) continuations.push_back(std::move(s.continuation));
    auto facts = reflection::build_fact_inventory(*providers_.assistant, c, continuations,
                                                  config_.reflection);
    store_facts(run_dir_ / "reflect" / c.id / "facts.jsonl", facts);
    total += facts.size();
  }
  mark("reflect", {{"facts", total}});
  return StageStatus::kCompleted;
}

StageStatus Runner::synthesize() {
  capture_config();
  if (is_complete("synthesize")) return StageStatus::kAlreadyComplete;
  require("reflect");
  Manifest manifest = config_.manifest;
  manifest.epochs = std::max(manifest.epochs, config_.epochs_sweep);
  std::size_t total = 0;
  for (const auto& c : conversations()) {
    auto facts = load_facts(run_dir_ / "reflect" / c.id / "facts.jsonl");
    auto set = synthesis::assemble_training_set(*providers_.assistant, c.id, facts, manifest,
                                                config_.synthesis);
    store_training_set(run_dir_ / "synthesize" / c.id, set);
    total += set.examples.size();
  }
  mark("synthesize", {{"examples", total}});
  return StageStatus::kCompleted;
}

StageStatus Runner::train() {
  capture_config();
  if (is_complete("train")) return StageStatus::kAlreadyComplete;
  require("synthesize");
  const auto all_questions = questions();
  std::string mode = "inputs-only";
  for (const auto& c : conversations()) {
    const fs::path dir = run_dir_ / "train" / c.id;
    const fs::path out = dir / "out";
    const fs::path qfile = dir / "questions.jsonl";
    store_questions(qfile, questions_for(all_questions, c.id));
    const fs::path inputs = run_dir_ / "synthesize" / c.id;
    if (!config_.trainer.command.empty()) {
      mode = "subprocess";
      trainer::invoke(config_.trainer.command,
                      {inputs / "training_set.jsonl", inputs / "manifest.json", qfile, out});
    } else if (!config_.trainer.outputs_dir.empty()) {
      mode = "pre-generated";
      const fs::path src = config_.trainer.outputs_dir / c.id;
      if (!fs::is_directory(src)) {
        throw Error(ErrorKind::kDependency,
                    fmt::format("no trainer outputs for '{}' under {}", c.id, src.string()));
      }
      fs::create_directories(out);
      fs::copy(src, out, fs::copy_options::overwrite_existing | fs::copy_options::recursive);
    } else {
      spdlog::info("no trainer configured; trainer inputs written under {}", dir.string());
    }
  }
  mark("train", {{"mode", mode}});
  return StageStatus::kCompleted;
}

StageStatus Runner::evaluate(const Condition& condition) {
  capture_config();
  const std::string stage = stage_name(condition);
  if (is_complete(stage)) return StageStatus::kAlreadyComplete;

  using Kind = Condition::Kind;
  switch (condition.kind) {
    case Kind::kNoContext:
    case Kind::kFullContext:
      require("ingest");
      break;
    case Kind::kCompaction:
      require("compact");
      if (condition.index > config_.compaction.cycles) {
        throw Error(ErrorKind::kConfig,
                    fmt::format("{} exceeds the configured {} cycles", condition.name(),
                                config_.compaction.cycles));
      }
      break;
    case Kind::kConsolidated:
      require("train");
      break;
  }

  const auto convs = conversations();
  const auto all_questions = questions();
  std::vector<evaluation::Answer> answers;

  if (condition.kind == Kind::kConsolidated) {
    for (const auto& c : convs) {
      const fs::path file = trainer::answers_file(run_dir_ / "train" / c.id / "out", condition.index);
      if (!fs::exists(file)) {
        throw Error(ErrorKind::kDependency,
                    fmt::format("missing trainer answers file {}", file.string()));
      }
      auto qs = questions_for(all_questions, c.id);
      auto got = evaluation::ingest_answers(file, condition, qs);
      answers.insert(answers.end(), std::make_move_iterator(got.begin()),
                     std::make_move_iterator(got.end()));
    }
  } else {
    std::map<std::string, const Conversation*> by_id;
    for (const auto& c : convs) by_id[c.id] = &c;
    std::map<std::string, std::vector<compaction::CycleState>> cycles;
    if (condition.kind == Kind::kCompaction) {
      for (const auto& c : convs) cycles[c.id] = compaction::load_cycles(run_dir_ / "compact" / c.id);
    }
    auto lookup = [&](const std::string& id) {
      evaluation::EvalArtifacts a;
      auto it = by_id.find(id);
      if (it != by_id.end()) a.original = it->second;
      if (auto ct = cycles.find(id); ct != cycles.end()) a.cycles = ct->second;
      return a;
    };
    answers = evaluation::collect_answers(*providers_.base_model, condition, all_questions, lookup,
                                          config_.evaluation);
  }

  auto judgments =
      evaluation::judge_all(*providers_.judge, all_questions, answers, config_.evaluation);
  const fs::path dir = run_dir_ / "eval" / condition.name();
  evaluation::store_answers(dir / "answers.jsonl", answers);
  evaluation::store_judgments(dir / "judgments.jsonl", judgments);

  int pass = 0, fail = 0, error = 0;
  for (const auto& j : judgments) {
    (j.verdict == evaluation::Verdict::kPass   ? pass
     : j.verdict == evaluation::Verdict::kFail ? fail
                                               : error)++;
  }
  mark(stage, {{"pass", pass}, {"fail", fail}, {"error", error}});
  return StageStatus::kCompleted;
}

std::vector<Condition> Runner::planned_conditions() const {
  std::vector<Condition> out{Condition::no_context()};
  for (int i = 1; i <= config_.compaction.cycles; ++i) out.push_back(Condition::compaction(i));
  for (int e : config_.consolidated_epochs()) out.push_back(Condition::consolidated(e));
  out.push_back(Condition::full_context());
  return out;
}

std::vector<Condition> Runner::expand_condition(std::string_view text) const {
  auto planned = planned_conditions();
  if (text == "all") return planned;
  if (text == "compaction" || text == "consolidated") {
    const auto kind = text == "compaction" ? Condition::Kind::kCompaction
                                           : Condition::Kind::kConsolidated;
    std::erase_if(planned, [&](const Condition& c) { return c.kind != kind; });
    return planned;
  }
  return {Condition::parse(text)};
}

analysis::AnalysisInputs Runner::analysis_inputs() const {
  analysis::AnalysisInputs in;
  const auto qs = questions();
  std::set<int> epochs;
  for (const auto& c : planned_conditions()) {
    analysis::ConditionScores cs;
    cs.condition = c;
    if (is_complete(stage_name(c))) {
      auto judgments = evaluation::load_judgments(run_dir_ / "eval" / c.name() / "judgments.jsonl");
      cs.per_conversation = evaluation::score(judgments, qs);
      cs.present = true;
    }
    if (c.kind == Condition::Kind::kConsolidated) epochs.insert(c.index);
    in.conditions.push_back(std::move(cs));
  }
  if (is_complete("train")) {
    const auto convs = conversations();
    for (int e : epochs) {
      std::vector<double> pooled;
      for (const auto& c : convs) {
        const fs::path file = trainer::ce_log_file(run_dir_ / "train" / c.id / "out", e);
        if (!fs::exists(file)) continue;
        auto records = trainer::load_ce_log(file);
        auto values = trainer::pooled_ces(records, e);
        pooled.insert(pooled.end(), values.begin(), values.end());
      }
      if (!pooled.empty()) in.ce_by_epoch.emplace_back(e, std::move(pooled));
    }
  }
  return in;
}

StageStatus Runner::analyze() {
  capture_config();
  if (is_complete("analyze")) return StageStatus::kAlreadyComplete;
  require("ingest");
  auto result = analysis::analyze(analysis_inputs());
  write_json_file(run_dir_ / "analysis" / "analysis.json", analysis::to_json(result));
  int present = 0;
  for (const auto& c : result.conditions) present += c.present ? 1 : 0;
  mark("analyze", {{"conditions_present", present}});
  return StageStatus::kCompleted;
}

StageStatus Runner::report() {
  capture_config();
  if (is_complete("report")) return StageStatus::kAlreadyComplete;
  require("analyze");
  auto result = analysis::analyze(analysis_inputs());
  analysis::emit_report(result, run_dir_ / "report");
  mark("report", json::object());
  return StageStatus::kCompleted;
}

void Runner::run_all(std::span<const std::string> filter) {
  auto note = [](std::string_view stage, StageStatus s) {
    if (s == StageStatus::kAlreadyComplete) spdlog::info("{}: already complete", stage);
  };
  note("ingest", ingest(filter));
  note("compact", compact());
  note("reflect", reflect());
  note("synthesize", synthesize());
  note("train", train());
  const bool have_answers =
      !config_.trainer.command.empty() || !config_.trainer.outputs_dir.empty();
  for (const auto& c : planned_conditions()) {
    if (c.kind == Condition::Kind::kConsolidated && !have_answers) {
      spdlog::warn("{}: skipped, no trainer configured", c.name());
      continue;
    }
    note(stage_name(c), evaluate(c));
  }
  note("analyze", analyze());
  note("report", report());
}

}  // namespace consol::pipeline
