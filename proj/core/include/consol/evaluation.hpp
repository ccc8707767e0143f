#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consol/compaction.hpp"
#include "consol/corpus.hpp"
#include "consol/provider.hpp"

namespace consol::evaluation {

/// Which context the model under test sees.
struct Condition {
  enum class Kind { kNoContext, kFullContext, kCompaction, kConsolidated };

  Kind kind = Kind::kNoContext;
  int index = 0;  // compaction cycle or consolidated epoch; 0 otherwise

  static Condition no_context() { return {Kind::kNoContext, 0}; }
  static Condition full_context() { return {Kind::kFullContext, 0}; }
  static Condition compaction(int cycle) { return {Kind::kCompaction, cycle}; }
  static Condition consolidated(int epoch) { return {Kind::kConsolidated, epoch}; }

  /// "no_context", "full_context", "compaction-<cycle>", "consolidated-<epoch>".
  std::string name() const;
  /// Inverse of name(); also accepts "compaction:<n>" / "consolidated:<n>".
  static Condition parse(std::string_view text);

  friend auto operator<=>(const Condition&, const Condition&) = default;
};

struct Answer {
  std::string question_id;
  Condition condition;
  std::string text;
  int completion_tokens = 0;

  friend bool operator==(const Answer&, const Answer&) = default;
};

enum class Verdict { kPass, kFail, kError };

std::string_view to_string(Verdict verdict);

struct Judgment {
  std::string question_id;
  Condition condition;
  Verdict verdict = Verdict::kError;
  std::string judge_raw;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

struct Options {
  std::string answer_model_tag;
  std::string judge_model_tag;
  int max_new_tokens = 512;
  int judge_max_new_tokens = 1024;
  /// Extra judge attempts after an unparseable reply.
  int judge_retries = 2;
  int max_parallel = 4;
};

/// What a condition may put in the system prompt for one conversation.
struct EvalArtifacts {
  const Conversation* original = nullptr;
  std::span<const compaction::CycleState> cycles;
};

/// System message per condition: full_context gets the original transcript,
/// compaction(i) gets cycle i's context_for_eval, no_context and consolidated
/// get none. The question is the only user message; temperature 0.
ChatRequest build_prompt(const Condition& condition, const TestQuestion& question,
                         const EvalArtifacts& artifacts, const Options& options);

using ArtifactLookup = std::function<EvalArtifacts(const std::string& conversation_id)>;

/// One answer per question, in question order.
std::vector<Answer> collect_answers(Provider& model, const Condition& condition,
                                    std::span<const TestQuestion> questions,
                                    const ArtifactLookup& artifacts, const Options& options);

inline constexpr std::string_view kAnswerSchema = "answer";
inline constexpr std::string_view kJudgmentSchema = "judgment";

json to_json(const Answer& answer);
Answer answer_from_json(const json& j, std::string_view where);
json to_json(const Judgment& judgment);
Judgment judgment_from_json(const json& j, std::string_view where);

void store_answers(const std::filesystem::path& path, std::span<const Answer> answers);
/// Reads an answers file (e.g. trainer-exported consolidated answers). Every
/// record must carry `condition`, every question must be answered exactly
/// once, and no unknown question ids may appear; otherwise a schema error.
std::vector<Answer> ingest_answers(const std::filesystem::path& path, const Condition& condition,
                                   std::span<const TestQuestion> questions);

void store_judgments(const std::filesystem::path& path, std::span<const Judgment> judgments);
std::vector<Judgment> load_judgments(const std::filesystem::path& path);

/// The verdict on the last non-empty line: exactly "VERDICT: PASS" or
/// "VERDICT: FAIL" (surrounding whitespace ignored).
std::optional<Verdict> parse_verdict(std::string_view judge_reply);

/// `attempt` 0 is the plain judge prompt; later attempts append the previous
/// reply and a reminder of the required final line.
ChatRequest judge_request(const TestQuestion& question, const Answer& answer,
                          const Options& options, int attempt = 0,
                          std::string_view previous_reply = {});

/// Never throws for unparseable judge output: after judge_retries extra
/// attempts the verdict is kError.
Judgment judge(Provider& judge_provider, const TestQuestion& question, const Answer& answer,
               const Options& options);

std::vector<Judgment> judge_all(Provider& judge_provider, std::span<const TestQuestion> questions,
                                std::span<const Answer> answers, const Options& options);

struct Cell {
  int pass = 0;
  int fail = 0;
  int error = 0;

  int judged() const { return pass + fail; }
  /// pass / (pass + fail) in percent; absent when nothing was judgeable.
  std::optional<double> accuracy() const;
  /// error / (pass + fail + error) in percent.
  double error_rate() const;

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct ConversationScore {
  std::string conversation_id;
  std::map<MemoryType, Cell> by_type;
  Cell overall;

  friend bool operator==(const ConversationScore&, const ConversationScore&) = default;
};

/// Per-conversation, per-type tallies (sorted by conversation id). Judgments
/// whose question_id is unknown raise an integrity error.
std::vector<ConversationScore> score(std::span<const Judgment> judgments,
                                     std::span<const TestQuestion> questions);

}  // namespace consol::evaluation
