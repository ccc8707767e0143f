#include "consol/evaluation.hpp"

#include <charconv>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "consol/error.hpp"
#include "consol/prompts.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace consol::evaluation {

std::string Condition::name() const {
  switch (kind) {
    case Kind::kNoContext: return "no_context";
    case Kind::kFullContext: return "full_context";
    case Kind::kCompaction: return fmt::format("compaction-{}", index);
    case Kind::kConsolidated: return fmt::format("consolidated-{}", index);
  }
  return "no_context";
}

Condition Condition::parse(std::string_view text) {
  if (text == "no_context" || text == "no-context") return no_context();
  if (text == "full_context" || text == "full-context") return full_context();
  auto parse_suffix = [&](std::string_view prefix) -> std::optional<int> {
    if (!text.starts_with(prefix) || text.size() <= prefix.size() + 1) return std::nullopt;
    char sep = text[prefix.size()];
    if (sep != '-' && sep != ':') return std::nullopt;
    std::string_view digits = text.substr(prefix.size() + 1);
    int value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || value < 1) return std::nullopt;
    return value;
  };
  if (auto c = parse_suffix("compaction")) return compaction(*c);
  if (auto e = parse_suffix("consolidated")) return consolidated(*e);
  throw Error(ErrorKind::kConfig, fmt::format("unknown condition '{}'", text));
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kError: return "error";
  }
  return "error";
}

ChatRequest build_prompt(const Condition& condition, const TestQuestion& question,
                         const EvalArtifacts& artifacts, const Options& options) {
  ChatRequest req;
  req.model_tag = options.answer_model_tag;
  req.temperature = 0.0;
  req.max_new_tokens = options.max_new_tokens;
  req.label = fmt::format("answer/{}/{}", condition.name(), question.id);
  switch (condition.kind) {
    case Condition::Kind::kNoContext:
    case Condition::Kind::kConsolidated:
      break;
    case Condition::Kind::kFullContext:
      if (artifacts.original == nullptr) {
        throw Error(ErrorKind::kContract,
                    fmt::format("full_context needs the original transcript of {}",
                                question.conversation_id));
      }
      req.messages.push_back(Turn{Role::kSystem, artifacts.original->transcript()});
      break;
    case Condition::Kind::kCompaction: {
      const compaction::CycleState* state = nullptr;
      for (const auto& c : artifacts.cycles) {
        if (c.cycle_index == condition.index) state = &c;
      }
      if (state == nullptr) {
        throw Error(ErrorKind::kContract,
                    fmt::format("{} needs cycle {} state for {}", condition.name(),
                                condition.index, question.conversation_id));
      }
      req.messages.push_back(Turn{Role::kSystem, state->context_for_eval});
      break;
    }
  }
  req.messages.push_back(Turn{Role::kUser, question.question});
  return req;
}

std::vector<Answer> collect_answers(Provider& model, const Condition& condition,
                                    std::span<const TestQuestion> questions,
                                    const ArtifactLookup& artifacts, const Options& options) {
  std::vector<Answer> answers(questions.size());
  detail::parallel_for(questions.size(), options.max_parallel, [&](std::size_t i) {
    const TestQuestion& q = questions[i];
    ChatResponse r = model.complete(build_prompt(condition, q, artifacts(q.conversation_id), options));
    answers[i] = Answer{q.id, condition, r.content, r.completion_tokens};
  });
  return answers;
}

// --- Files ------------------------------------------------------------------

json to_json(const Answer& a) {
  return json{{"question_id", a.question_id},
              {"condition", a.condition.name()},
              {"text", a.text},
              {"completion_tokens", a.completion_tokens}};
}

Answer answer_from_json(const json& j, std::string_view where) {
  Answer a;
  a.question_id = require_string(j, "question_id", where);
  try {
    a.condition = Condition::parse(require_string(j, "condition", where));
  } catch (const Error& e) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'condition': {}", where, e.what()));
  }
  a.text = require_string(j, "text", where);
  if (j.contains("completion_tokens")) a.completion_tokens = static_cast<int>(require_int(j, "completion_tokens", where));
  return a;
}

json to_json(const Judgment& j) {
  return json{{"question_id", j.question_id},
              {"condition", j.condition.name()},
              {"verdict", to_string(j.verdict)},
              {"judge_raw", j.judge_raw}};
}

Judgment judgment_from_json(const json& j, std::string_view where) {
  Judgment out;
  out.question_id = require_string(j, "question_id", where);
  try {
    out.condition = Condition::parse(require_string(j, "condition", where));
  } catch (const Error& e) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'condition': {}", where, e.what()));
  }
  auto v = require_string(j, "verdict", where);
  if (v == "pass") {
    out.verdict = Verdict::kPass;
  } else if (v == "fail") {
    out.verdict = Verdict::kFail;
  } else if (v == "error") {
    out.verdict = Verdict::kError;
  } else {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'verdict': unknown '{}'", where, v));
  }
  out.judge_raw = require_string(j, "judge_raw", where);
  return out;
}

void store_answers(const std::filesystem::path& path, std::span<const Answer> answers) {
  std::vector<json> records;
  for (const auto& a : answers) records.push_back(to_json(a));
  write_records(path, kAnswerSchema, records);
}

std::vector<Answer> ingest_answers(const std::filesystem::path& path, const Condition& condition,
                                   std::span<const TestQuestion> questions) {
  auto records = read_records(path, kAnswerSchema);
  std::map<std::string, Answer> by_id;
  std::set<std::string> known;
  for (const auto& q : questions) known.insert(q.id);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = fmt::format("{}: record {}", path.string(), i + 1);
    Answer a = answer_from_json(records[i], where);
    if (a.condition != condition) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'condition': expected {}, got {}", where,
                              condition.name(), a.condition.name()));
    }
    if (!known.contains(a.question_id)) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'question_id': unknown question '{}'", where,
                              a.question_id));
    }
    if (!by_id.emplace(a.question_id, a).second) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'question_id': duplicate answer for '{}'", where,
                              a.question_id));
    }
  }
  std::vector<Answer> out;
  std::vector<std::string> missing;
  for (const auto& q : questions) {
    auto it = by_id.find(q.id);
    if (it == by_id.end()) {
      missing.push_back(q.id);
    } else {
      out.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: {} question(s) unanswered: {}", path.string(), missing.size(),
                            fmt::join(missing, ", ")));
  }
  return out;
}

void store_judgments(const std::filesystem::path& path, std::span<const Judgment> judgments) {
  std::vector<json> records;
  for (const auto& j : judgments) records.push_back(to_json(j));
  write_records(path, kJudgmentSchema, records);
}

std::vector<Judgment> load_judgments(const std::filesystem::path& path) {
  std::vector<Judgment> out;
  auto records = read_records(path, kJudgmentSchema);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(judgment_from_json(records[i], fmt::format("{}: record {}", path.string(), i + 1)));
  }
  return out;
}

// --- Judging ----------------------------------------------------------------

std::optional<Verdict> parse_verdict(std::string_view judge_reply) {
  auto lines = detail::split_lines(judge_reply);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string_view line = detail::trim(*it);
    if (line.empty()) continue;
    if (line == "VERDICT: PASS") return Verdict::kPass;
    if (line == "VERDICT: FAIL") return Verdict::kFail;
    return std::nullopt;
  }
  return std::nullopt;
}

ChatRequest judge_request(const TestQuestion& question, const Answer& answer,
                          const Options& options, int attempt, std::string_view previous_reply) {
  ChatRequest req;
  req.model_tag = options.judge_model_tag;
  req.temperature = 0.0;
  req.max_new_tokens = options.judge_max_new_tokens;
  req.label = fmt::format("judge/{}/{}/attempt{}", answer.condition.name(), question.id, attempt);
  req.messages.push_back(Turn{Role::kUser,
                              render_prompt("judge", {{"question", question.question},
                                                      {"expected_answer", question.expected_answer},
                                                      {"response", answer.text}})});
  if (attempt > 0) {
    req.messages.push_back(Turn{Role::kAssistant, std::string(previous_reply)});
    std::string reminder(detail::trim(prompt_text("judge_retry")));
    // Distinct text per attempt keeps retries distinct requests.
    if (attempt > 1) reminder += fmt::format(" (attempt {})", attempt + 1);
    req.messages.push_back(Turn{Role::kUser, reminder});
  }
  return req;
}

Judgment judge(Provider& judge_provider, const TestQuestion& question, const Answer& answer,
               const Options& options) {
  Judgment j{question.id, answer.condition, Verdict::kError, {}};
  std::string previous;
  for (int attempt = 0; attempt <= options.judge_retries; ++attempt) {
    ChatResponse r =
        judge_provider.complete(judge_request(question, answer, options, attempt, previous));
    j.judge_raw = r.content;
    if (auto v = parse_verdict(r.content)) {
      j.verdict = *v;
      return j;
    }
    previous = r.content;
  }
  spdlog::warn("judge: no verdict for {} under {} after {} attempts", question.id,
               answer.condition.name(), options.judge_retries + 1);
  return j;
}

std::vector<Judgment> judge_all(Provider& judge_provider, std::span<const TestQuestion> questions,
                                std::span<const Answer> answers, const Options& options) {
  std::map<std::string, const TestQuestion*> by_id;
  for (const auto& q : questions) by_id[q.id] = &q;
  std::vector<Judgment> out(answers.size());
  detail::parallel_for(answers.size(), options.max_parallel, [&](std::size_t i) {
    auto it = by_id.find(answers[i].question_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kIntegrity,
                  fmt::format("answer for unknown question '{}'", answers[i].question_id));
    }
    out[i] = judge(judge_provider, *it->second, answers[i], options);
  });
  return out;
}

// --- Scoring ----------------------------------------------------------------

std::optional<double> Cell::accuracy() const {
  if (judged() == 0) return std::nullopt;
  return 100.0 * pass / judged();
}

double Cell::error_rate() const {
  const int total = pass + fail + error;
  return total == 0 ? 0.0 : 100.0 * error / total;
}

std::vector<ConversationScore> score(std::span<const Judgment> judgments,
                                     std::span<const TestQuestion> questions) {
  std::map<std::string, const TestQuestion*> by_id;
  std::map<std::string, ConversationScore> per;
  for (const auto& q : questions) {
    by_id[q.id] = &q;
    auto& s = per[q.conversation_id];
    s.conversation_id = q.conversation_id;
    for (MemoryType t : kMemoryTypes) s.by_type[t];
  }
  for (const auto& j : judgments) {
    auto it = by_id.find(j.question_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kIntegrity,
                  fmt::format("judgment references unknown question '{}'", j.question_id));
    }
    auto& s = per[it->second->conversation_id];
    auto bump = [&](Cell& c) {
      switch (j.verdict) {
        case Verdict::kPass: ++c.pass; break;
        case Verdict::kFail: ++c.fail; break;
        case Verdict::kError: ++c.error; break;
      }
    };
    bump(s.by_type[it->second->type]);
    bump(s.overall);
  }
  std::vector<ConversationScore> out;
  for (auto& [id, s] : per) out.push_back(std::move(s));
  return out;
}

}  // namespace consol::evaluation
