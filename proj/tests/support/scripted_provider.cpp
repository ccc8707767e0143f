#include "scripted_provider.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "consol/compaction.hpp"
#include "consol/error.hpp"
#include "consol/synthesis.hpp"

namespace consol::testing {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

const char* const kTemplates[6][4] = {
    {"What is the {} in devtool?", "Tell me the {} we agreed on.", "State the {} for the project.",
     "Quick question: {}?"},
    {"How do I handle the {} correctly?", "What steps does the {} involve?",
     "How should I apply the {} when writing code?", "Walk me through the {}."},
    {"Do you remember what we decided about the {}?", "Remind me about the {}.",
     "What did we settle on for the {}?", "Can you recall the {} discussion?"},
    {"I'm about to change something related to the {}. What should I keep in mind?",
     "A teammate asks about the {}. What do I tell them?",
     "We are onboarding someone new; how would you explain the {}?",
     "I'm reviewing a pull request touching the {}. What matters?"},
    {"Is it fine to ignore the {}?", "We don't really have a rule for the {}, right?",
     "Can I do something different from the {}?", "The {} doesn't matter here, does it?"},
    {"Write a note for the team covering the {}.", "Help me document the {}.",
     "Draft a checklist item about the {}.", "Summarize the {} for the README."},
};

}  // namespace

fs::path micro_dir() { return fs::path(CONSOL_MICRO_DIR); }

ScriptedProvider::ScriptedProvider(fs::path source_dir) : dir_(std::move(source_dir)) {
  script_ = read_json_file(dir_ / "script.json");
}

std::string ScriptedProvider::read_source(const std::string& name) const {
  return read_text_file(dir_ / (name + ".txt"));
}

Conversation ScriptedProvider::original() const {
  const std::string id = script_.at("conversation_id");
  return compaction::parse_transcript(read_source(id), id, script_.at("scenario"));
}

Conversation ScriptedProvider::continuation(int cycle) const {
  const std::string id = script_.at("continuations").at(cycle - 1);
  return compaction::parse_transcript(read_source(id), id, script_.at("scenario"));
}

std::vector<TestQuestion> ScriptedProvider::questions() const {
  std::vector<TestQuestion> out;
  for (const auto& q : script_.at("questions")) {
    TestQuestion t;
    t.id = q.at("id");
    t.conversation_id = script_.at("conversation_id");
    t.type = *parse_memory_type(q.at("type").get<std::string>());
    t.question = q.at("question");
    t.expected_answer = q.at("expected_answer");
    out.push_back(std::move(t));
  }
  return out;
}

bool ScriptedProvider::passes(const std::string& condition, const std::string& qid) const {
  if (condition.starts_with("consolidated-")) {
    const int epoch = std::stoi(condition.substr(13));
    const auto& c = script_.at("consolidated");
    const auto& order = c.at("order");
    const int n = c.at("passes_per_epoch").at(epoch - 1);
    for (int i = 0; i < n; ++i) {
      if (order.at(i) == qid) return true;
    }
    return false;
  }
  const auto& list = script_.at("verdicts").at(condition).at("pass");
  return std::find(list.begin(), list.end(), qid) != list.end();
}

bool ScriptedProvider::judge_errors(const std::string& condition, const std::string& qid) const {
  const auto& v = script_.at("verdicts");
  if (!v.contains(condition)) return false;
  const auto& list = v.at(condition).at("error");
  return std::find(list.begin(), list.end(), qid) != list.end();
}

std::string ScriptedProvider::reflection_reply(const std::string& conversation_id,
                                               int pass) const {
  std::string body;
  for (const auto& f : script_.at("reflection").at(conversation_id).at(pass - 1)) {
    body += f.dump() + "\n";
  }
  return fmt::format("Facts from this pass:\n\n```jsonl\n{}```\n", body);
}

std::string ScriptedProvider::synthesis_reply(const std::string& fact_id, bool topup) const {
  // Fact ids follow "<conversation>/p<pass>/f<NNN>".
  auto parts = split(fact_id, '/');
  const int pass = std::stoi(parts.at(1).substr(1));
  const int index = std::stoi(parts.at(2).substr(1));
  const json& fact = script_.at("reflection").at(parts.at(0)).at(pass - 1).at(index - 1);
  const std::string name = fact.at("name");
  std::string lower;
  for (char ch : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  const std::string content = fact.at("content");

  const auto& shortfall = script_.at("synthesis_shortfall");
  int valid = 20;
  int malformed = 0;
  int offset = 0;
  if (fact_id == shortfall.at("fact_id").get<std::string>()) {
    valid = topup ? shortfall.at("topup").get<int>() : shortfall.at("valid").get<int>();
    malformed = topup ? 0 : shortfall.at("malformed").get<int>();
    if (topup) offset = shortfall.at("valid").get<int>();
  }

  auto plan = synthesis::style_plan(valid, offset);
  int seen[6] = {};
  std::string body;
  for (int i = 0; i < valid; ++i) {
    const int s = static_cast<int>(plan[i]);
    const std::string question = fmt::format(fmt::runtime(kTemplates[s][seen[s] % 4]), lower);
    ++seen[s];
    json rec{{"style", to_string(plan[i])},
             {"messages",
              {{{"role", "user"}, {"content", question}},
               {{"role", "assistant"}, {"content", content}}}}};
    body += rec.dump() + "\n";
  }
  for (int i = 0; i < malformed; ++i) {
    json rec{{"style", "direct"},
             {"messages",
              {{{"role", "user"}, {"content", "What is the " + lower + "?"}},
               {{"role", "assistant"}, {"content", content}},
               {{"role", "user"}, {"content", "Thanks."}}}}};
    body += rec.dump() + "\n";
  }
  return fmt::format("```jsonl\n{}```\n", body);
}

std::string ScriptedProvider::answer_reply(const std::string& condition,
                                           const std::string& qid) const {
  // Judge requests are keyed on the answer text, so the unjudgeable answer
  // needs text of its own.
  if (judge_errors(condition, qid)) return "It had something to do with files, I think.";
  if (!passes(condition, qid)) return "I don't have that information.";
  for (const auto& q : script_.at("questions")) {
    if (q.at("id") == qid) return q.at("expected_answer");
  }
  throw Error(ErrorKind::kContract, "unknown question " + qid);
}

std::string ScriptedProvider::judge_reply(const std::string& condition,
                                          const std::string& qid) const {
  if (judge_errors(condition, qid)) return "The response is partially relevant to the question.";
  return passes(condition, qid) ? "The response matches the expected facts.\nVERDICT: PASS"
                                : "The response does not contain the expected facts.\nVERDICT: FAIL";
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
  ++calls_;
  auto parts = split(request.label, '/');
  const std::string& kind = parts.at(0);
  std::string content;
  if (kind == "reflect") {
    content = reflection_reply(parts.at(1), std::stoi(parts.at(2).substr(4)));
  } else if (kind == "synthesize" || kind == "synthesize-topup") {
    content = synthesis_reply(request.label.substr(kind.size() + 1), kind == "synthesize-topup");
  } else if (kind == "summarize") {
    const auto& options = script_.at("summaries").at(parts.at(1) + "/" + parts.at(2));
    content = options.at(parts.size() > 3 && parts.at(3) == "shorten" ? 1 : 0);
  } else if (kind == "continue") {
    content = read_source(parts.at(1));
  } else if (kind == "answer") {
    content = answer_reply(parts.at(1), parts.at(2));
  } else if (kind == "judge") {
    content = judge_reply(parts.at(1), parts.at(2));
  } else {
    throw Error(ErrorKind::kMissingFixture, "no script for request '" + request.label + "'");
  }
  ChatResponse r;
  r.content = std::move(content);
  r.prompt_tokens = 0;
  r.completion_tokens = static_cast<int>(count_tokens(r.content));
  return r;
}

}  // namespace consol::testing
