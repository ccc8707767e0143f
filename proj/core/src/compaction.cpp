#include "consol/compaction.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "consol/error.hpp"
#include "consol/prompts.hpp"
#include "text_util.hpp"

namespace consol::compaction {

namespace fs = std::filesystem;

std::int64_t summary_target(std::int64_t input_tokens, int ratio) {
  if (ratio < 1) throw Error(ErrorKind::kContract, "compaction ratio must be >= 1");
  return (input_tokens + ratio - 1) / ratio;
}

double summary_bound(std::int64_t input_tokens, int ratio, double tolerance) {
  return static_cast<double>(summary_target(input_tokens, ratio)) * tolerance;
}

ContinuationWindow continuation_window(std::int64_t target_tokens, double tolerance) {
  const double t = static_cast<double>(target_tokens);
  return {static_cast<std::int64_t>(std::ceil(t * (1.0 - tolerance) - 1e-9)),
          static_cast<std::int64_t>(std::floor(t * (1.0 + tolerance) + 1e-9))};
}

namespace {

// ~0.75 words per token is the usual English rule of thumb.
std::string words_for(std::int64_t tokens) { return std::to_string(tokens * 3 / 4); }

}  // namespace

ChatRequest summary_request(std::string_view context, std::int64_t target_tokens,
                            const Options& options, std::string_view label) {
  ChatRequest req;
  req.model_tag = options.model_tag;
  req.temperature = options.summary_temperature;
  req.max_new_tokens = static_cast<int>(
      std::ceil(static_cast<double>(target_tokens) * options.summary_tolerance)) + 64;
  req.label = std::string(label);
  req.messages.push_back(Turn{Role::kUser,
                              render_prompt("summarize", {{"target_tokens", std::to_string(target_tokens)},
                                                          {"target_words", words_for(target_tokens)},
                                                          {"context", std::string(context)}})});
  return req;
}

ChatRequest shorten_request(std::string_view summary, std::int64_t actual_tokens,
                            std::int64_t target_tokens, const Options& options,
                            std::string_view label) {
  ChatRequest req = summary_request("", target_tokens, options, label);
  req.label = fmt::format("{}/shorten", label);
  req.messages.front().content =
      render_prompt("shorten", {{"target_tokens", std::to_string(target_tokens)},
                                {"target_words", words_for(target_tokens)},
                                {"actual_tokens", std::to_string(actual_tokens)},
                                {"summary", std::string(summary)}});
  return req;
}

SummaryResult summarize(Provider& provider, std::string_view context, const Options& options,
                        std::string_view label, std::optional<std::int64_t> input_tokens) {
  if (context.empty()) throw Error(ErrorKind::kContract, "summarize: empty context");
  SummaryResult result;
  result.input_tokens = input_tokens.value_or(count_tokens(context));
  result.target_tokens = summary_target(result.input_tokens, options.ratio);
  const double bound = static_cast<double>(result.target_tokens) * options.summary_tolerance;

  auto measure = [&](const ChatResponse& r) {
    if (options.prefer_provider_usage && r.completion_tokens > 0) {
      return static_cast<std::int64_t>(r.completion_tokens);
    }
    return count_tokens(r.content);
  };

  ChatResponse first =
      provider.complete(summary_request(context, result.target_tokens, options, label));
  result.text = std::string(detail::trim(first.content));
  result.tokens = measure(first);
  if (static_cast<double>(result.tokens) <= bound) return result;

  spdlog::info("{}: summary of {} tokens over bound {:.1f}; re-prompting", label, result.tokens,
               bound);
  ChatResponse second = provider.complete(
      shorten_request(result.text, result.tokens, result.target_tokens, options, label));
  result.text = std::string(detail::trim(second.content));
  result.tokens = measure(second);
  result.reprompted = true;
  if (static_cast<double>(result.tokens) > bound) {
    throw BudgetError(result.tokens, result.target_tokens,
                      fmt::format("{}: summary is {} tokens after re-prompt, target {} (bound {:.1f})",
                                  label, result.tokens, result.target_tokens, bound));
  }
  return result;
}

Conversation parse_transcript(std::string_view text, std::string id, std::string scenario) {
  std::vector<Turn> turns;
  std::string current;
  std::optional<Role> role;
  auto flush = [&] {
    if (!role) return;
    turns.push_back(Turn{*role, std::string(detail::trim(current))});
    current.clear();
  };
  for (std::string_view line : detail::split_lines(text)) {
    std::string_view t = detail::trim(line);
    if (t == "[USER]" || t == "[ASSISTANT]" || t == "[SYSTEM]") {
      flush();
      role = t == "[USER]" ? Role::kUser : t == "[ASSISTANT]" ? Role::kAssistant : Role::kSystem;
      continue;
    }
    if (!role) {
      if (!t.empty()) {
        throw Error(ErrorKind::kSchema,
                    fmt::format("{}: field 'turns': text before the first role marker", id));
      }
      continue;
    }
    if (!current.empty()) current += '\n';
    current += line;
  }
  flush();
  Conversation c = Conversation::make(std::move(id), std::move(scenario), std::move(turns));
  validate_conversation(c, fmt::format("continuation {}", c.id));
  return c;
}

ChatRequest continuation_request(std::string_view summary, std::string_view scenario,
                                 std::int64_t target_tokens, const Options& options,
                                 std::string_view label) {
  ChatRequest req;
  req.model_tag = options.model_tag;
  req.temperature = options.continuation_temperature;
  req.max_new_tokens = static_cast<int>(continuation_window(target_tokens,
                                                            options.continuation_tolerance)
                                            .max_tokens) + 256;
  req.label = std::string(label);
  req.messages.push_back(Turn{Role::kUser,
                              render_prompt("continuation",
                                            {{"scenario", std::string(scenario)},
                                             {"target_tokens", std::to_string(target_tokens)},
                                             {"summary", std::string(summary)}})});
  return req;
}

Conversation generate_continuation(Provider& provider, std::string_view summary,
                                   std::int64_t target_tokens, std::string id,
                                   std::string scenario, const Options& options) {
  if (summary.empty()) throw Error(ErrorKind::kContract, "generate_continuation: empty summary");
  const std::string label = fmt::format("continue/{}", id);
  ChatResponse reply =
      provider.complete(continuation_request(summary, scenario, target_tokens, options, label));
  Conversation c = parse_transcript(reply.content, std::move(id), std::move(scenario));
  auto window = continuation_window(target_tokens, options.continuation_tolerance);
  if (c.token_count < window.min_tokens || c.token_count > window.max_tokens) {
    throw Error(ErrorKind::kLength,
                fmt::format("continuation {} is {} tokens, outside [{}, {}]", c.id, c.token_count,
                            window.min_tokens, window.max_tokens));
  }
  return c;
}

std::string eval_context(std::string_view summary, const Conversation& continuation) {
  return fmt::format("{}\n\n{}", summary, continuation.transcript());
}

std::vector<CycleState> run_cycles(Provider& provider, const Conversation& original, int k,
                                   const Options& options) {
  if (k < 1) throw Error(ErrorKind::kContract, "run_cycles: k must be >= 1");
  std::vector<CycleState> cycles;
  std::string input = original.transcript();
  std::int64_t input_tokens = original.token_count;
  for (int i = 1; i <= k; ++i) {
    CycleState state;
    state.cycle_index = i;
    state.input_tokens = input_tokens;
    auto summary = summarize(provider, input, options,
                             fmt::format("summarize/{}/cycle{}", original.id, i), input_tokens);
    state.summary = std::move(summary.text);
    state.summary_tokens = summary.tokens;
    state.continuation =
        generate_continuation(provider, state.summary, options.continuation_tokens,
                              fmt::format("{}-c{}", original.id, i), original.scenario, options);
    state.context_for_eval = eval_context(state.summary, state.continuation);
    input = state.context_for_eval;
    input_tokens = state.summary_tokens + state.continuation.token_count;
    spdlog::info("compaction {} cycle {}: {} -> {} tokens summary + {} tokens continuation",
                 original.id, i, state.input_tokens, state.summary_tokens,
                 state.continuation.token_count);
    cycles.push_back(std::move(state));
  }
  return cycles;
}

void store_cycles(const fs::path& dir, const std::vector<CycleState>& cycles) {
  for (const auto& c : cycles) {
    fs::path d = dir / fmt::format("cycle_{}", c.cycle_index);
    write_text_file(d / "summary.txt", c.summary);
    store_conversation(d / "continuation.json", c.continuation);
    write_json_file(d / "accounting.json",
                    json{{"cycle", c.cycle_index},
                         {"input_tokens", c.input_tokens},
                         {"summary_tokens", c.summary_tokens},
                         {"continuation_tokens", c.continuation.token_count},
                         {"context_tokens", count_tokens(c.context_for_eval)}});
  }
}

std::vector<CycleState> load_cycles(const fs::path& dir) {
  std::vector<CycleState> out;
  for (int i = 1;; ++i) {
    fs::path d = dir / fmt::format("cycle_{}", i);
    if (!fs::is_directory(d)) break;
    CycleState c;
    c.cycle_index = i;
    c.summary = read_text_file(d / "summary.txt");
    c.continuation = load_conversation(d / "continuation.json");
    json acct = read_json_file(d / "accounting.json");
    const std::string where = (d / "accounting.json").string();
    c.input_tokens = require_int(acct, "input_tokens", where);
    c.summary_tokens = require_int(acct, "summary_tokens", where);
    c.context_for_eval = eval_context(c.summary, c.continuation);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace consol::compaction
