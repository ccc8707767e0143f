#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "consol/corpus.hpp"
#include "consol/provider.hpp"

namespace consol::compaction {

struct Options {
  std::string model_tag;
  int ratio = 6;
  /// Accepted summary length as a multiple of the target.
  double summary_tolerance = 1.2;
  std::int64_t continuation_tokens = 60000;
  /// Accepted continuation length window: target * (1 -/+ tolerance).
  double continuation_tolerance = 0.25;
  int cycles = 3;
  double summary_temperature = 0.0;
  double continuation_temperature = 0.7;
  /// Use provider-reported completion tokens for summaries when non-zero.
  bool prefer_provider_usage = false;
};

std::int64_t summary_target(std::int64_t input_tokens, int ratio);
double summary_bound(std::int64_t input_tokens, int ratio, double tolerance);

struct ContinuationWindow {
  std::int64_t min_tokens;
  std::int64_t max_tokens;
};
ContinuationWindow continuation_window(std::int64_t target_tokens, double tolerance);

struct SummaryResult {
  std::string text;
  std::int64_t tokens = 0;
  std::int64_t input_tokens = 0;
  std::int64_t target_tokens = 0;
  bool reprompted = false;
};

ChatRequest summary_request(std::string_view context, std::int64_t target_tokens,
                            const Options& options, std::string_view label);
ChatRequest shorten_request(std::string_view summary, std::int64_t actual_tokens,
                            std::int64_t target_tokens, const Options& options,
                            std::string_view label);

/// Summarizes `context` toward ceil(input_tokens / ratio) tokens. Over
/// target * tolerance triggers one shorten re-prompt; still over budget raises
/// BudgetError. `input_tokens` defaults to count_tokens(context).
SummaryResult summarize(Provider& provider, std::string_view context, const Options& options,
                        std::string_view label = "summarize",
                        std::optional<std::int64_t> input_tokens = std::nullopt);

/// Parses "[USER]" / "[ASSISTANT]" transcript text into a validated
/// conversation. Malformed or non-alternating turns raise a schema error.
Conversation parse_transcript(std::string_view text, std::string id, std::string scenario);

ChatRequest continuation_request(std::string_view summary, std::string_view scenario,
                                 std::int64_t target_tokens, const Options& options,
                                 std::string_view label);

/// Generates a continuation conditioned on `summary`; a transcript outside
/// the tolerance window raises a length error.
Conversation generate_continuation(Provider& provider, std::string_view summary,
                                   std::int64_t target_tokens, std::string id,
                                   std::string scenario, const Options& options);

struct CycleState {
  int cycle_index = 1;
  std::int64_t input_tokens = 0;
  std::string summary;
  std::int64_t summary_tokens = 0;
  Conversation continuation;
  /// summary, blank line, rendered continuation.
  std::string context_for_eval;

  friend bool operator==(const CycleState&, const CycleState&) = default;
};

std::string eval_context(std::string_view summary, const Conversation& continuation);

/// Cycle 1 summarizes the original; cycle i > 1 summarizes the previous
/// cycle's context_for_eval, whose token count is accounted as
/// summary_tokens + continuation.token_count of that cycle.
std::vector<CycleState> run_cycles(Provider& provider, const Conversation& original, int k,
                                   const Options& options);

/// Layout: <dir>/cycle_<i>/{summary.txt, continuation.json, accounting.json}.
void store_cycles(const std::filesystem::path& dir, const std::vector<CycleState>& cycles);
std::vector<CycleState> load_cycles(const std::filesystem::path& dir);

}  // namespace consol::compaction
