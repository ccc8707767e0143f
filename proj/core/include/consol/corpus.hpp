#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consol/jsonl.hpp"

namespace consol {

enum class Role { kUser, kAssistant, kSystem };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

struct Turn {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const Turn&, const Turn&) = default;
};

enum class MemoryType { kSemantic, kProcedural, kEpisodic };

inline constexpr MemoryType kMemoryTypes[] = {MemoryType::kSemantic, MemoryType::kProcedural,
                                              MemoryType::kEpisodic};

std::string_view to_string(MemoryType type);
std::optional<MemoryType> parse_memory_type(std::string_view text);

/// Token count under the default rule: ceil(byte length / 4). Zero only for
/// empty text.
std::int64_t count_tokens(std::string_view text);

/// Renders turns as "[USER]" / "[ASSISTANT]" / "[SYSTEM]" blocks separated by
/// blank lines. This is the canonical text of a conversation: token accounting,
/// full-context prompts and compaction inputs all use it.
std::string render_transcript(std::span<const Turn> turns);

struct Conversation {
  std::string id;
  std::string scenario;
  std::vector<Turn> turns;
  std::int64_t token_count = 0;

  /// Builds a conversation and computes token_count from the rendered turns.
  static Conversation make(std::string id, std::string scenario, std::vector<Turn> turns);

  std::string transcript() const { return render_transcript(turns); }

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

/// Throws a schema error ("turn order", "empty content", ...) if the
/// conversation violates its invariants. `where` prefixes the message.
void validate_conversation(const Conversation& conversation, std::string_view where);

struct Fact {
  std::string id;
  std::string name;
  MemoryType type = MemoryType::kEpisodic;
  std::string content;
  std::string source_conversation_id;
  int extraction_pass = 1;

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct TestQuestion {
  std::string id;
  std::string conversation_id;
  MemoryType type = MemoryType::kEpisodic;
  std::string question;
  std::string expected_answer;

  friend bool operator==(const TestQuestion&, const TestQuestion&) = default;
};

enum class Style { kDirect, kHowTo, kRecall, kScenario, kNegation, kTaskOriented };

inline constexpr Style kStyles[] = {Style::kDirect,   Style::kHowTo,    Style::kRecall,
                                    Style::kScenario, Style::kNegation, Style::kTaskOriented};

std::string_view to_string(Style style);
std::optional<Style> parse_style(std::string_view text);

struct SyntheticExample {
  std::string fact_id;
  std::vector<Turn> messages;  // exactly [user, assistant]
  Style style = Style::kDirect;

  friend bool operator==(const SyntheticExample&, const SyntheticExample&) = default;
};

/// True when `messages` is exactly one user turn followed by one assistant
/// turn, both non-empty.
bool is_two_message_exchange(std::span<const Turn> messages);

/// Hyperparameter contract handed to the trainer. Defaults are the canonical
/// LoRA configuration (rank 16, alpha 32, attention projections, lr 2e-4,
/// paged 8-bit AdamW with cosine schedule and 3% warmup, batch 8, 8 epochs).
struct Manifest {
  std::string base_model_tag = "Qwen2.5-7B-Instruct";
  int lora_rank = 16;
  int lora_alpha = 32;
  std::vector<std::string> target_modules = {"q_proj", "k_proj", "v_proj", "o_proj"};
  double learning_rate = 2e-4;
  std::string optimizer = "paged_adamw_8bit+cosine";
  double warmup_fraction = 0.03;
  int batch_size = 8;
  int epochs = 8;
  bool checkpoint_every_epoch = true;
  std::uint64_t seed = 42;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct TrainingSet {
  std::string conversation_id;
  std::vector<SyntheticExample> examples;
  Manifest manifest;
  std::map<std::string, int> per_fact_counts;

  friend bool operator==(const TrainingSet&, const TrainingSet&) = default;
};

// JSON mapping. from_json variants throw schema errors naming the field.
json to_json(const Turn& turn);
Turn turn_from_json(const json& j, std::string_view where);
json to_json(const Conversation& conversation);
Conversation conversation_from_json(const json& j, std::string_view where);
json to_json(const Fact& fact);
Fact fact_from_json(const json& j, std::string_view where);
json to_json(const TestQuestion& question);
TestQuestion question_from_json(const json& j, std::string_view where);
json to_json(const SyntheticExample& example);
SyntheticExample example_from_json(const json& j, std::string_view where);
json to_json(const Manifest& manifest);
Manifest manifest_from_json(const json& j, std::string_view where);

// Record-file schema names.
inline constexpr std::string_view kFactSchema = "fact";
inline constexpr std::string_view kQuestionSchema = "test_question";
inline constexpr std::string_view kExampleSchema = "training_example";

void store_conversation(const std::filesystem::path& path, const Conversation& conversation);
Conversation load_conversation(const std::filesystem::path& path);

/// Loads every `*.json` conversation file under `dir`, validates each, and
/// returns them sorted by id. Duplicate ids raise a conflict error.
std::vector<Conversation> load_corpus(const std::filesystem::path& dir);

void store_facts(const std::filesystem::path& path, std::span<const Fact> facts);
std::vector<Fact> load_facts(const std::filesystem::path& path);
void store_questions(const std::filesystem::path& path, std::span<const TestQuestion> questions);
std::vector<TestQuestion> load_questions(const std::filesystem::path& path);

/// Writes `training_set.jsonl`, `manifest.json` and `example_counts.json`
/// into `dir`.
void store_training_set(const std::filesystem::path& dir, const TrainingSet& set);
TrainingSet load_training_set(const std::filesystem::path& dir);

struct TypeCounts {
  int semantic = 0;
  int procedural = 0;
  int episodic = 0;

  int total() const { return semantic + procedural + episodic; }
  int& operator[](MemoryType type);
  int operator[](MemoryType type) const;

  friend bool operator==(const TypeCounts&, const TypeCounts&) = default;
};

struct ValidationReport {
  std::map<std::string, TypeCounts> per_conversation;  // every conversation, even with 0 questions
  TypeCounts totals;
  std::vector<std::string> warnings;
};

/// Cross-checks question -> conversation references and tallies question
/// counts per memory type. A dangling conversation_id raises an integrity
/// error listing the offending ids.
ValidationReport validate_run_inputs(std::span<const Conversation> conversations,
                                     std::span<const TestQuestion> questions);

json to_json(const ValidationReport& report);

}  // namespace consol
