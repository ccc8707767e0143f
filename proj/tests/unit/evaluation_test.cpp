#include <fstream>

#include <gtest/gtest.h>

#include "consol/error.hpp"
#include "consol/evaluation.hpp"
#include "expect_error.hpp"
#include "temp_dir.hpp"

namespace consol::evaluation {
namespace {

using testing::error_kind;

TestQuestion question(std::string id = "q1", MemoryType type = MemoryType::kEpisodic,
                      std::string conv = "x") {
  return {std::move(id), std::move(conv), type, "What is the default job timeout?", "300 seconds."};
}

struct Artifacts {
  Conversation original = Conversation::make(
      "x", "s", {{Role::kUser, "timeout?"}, {Role::kAssistant, "300 seconds."}});
  std::vector<compaction::CycleState> cycles;

  Artifacts() {
    for (int i = 1; i <= 3; ++i) {
      compaction::CycleState c;
      c.cycle_index = i;
      c.summary = "summary " + std::to_string(i);
      c.continuation = Conversation::make("x-c" + std::to_string(i), "s",
                                          {{Role::kUser, "u"}, {Role::kAssistant, "a"}});
      c.context_for_eval = compaction::eval_context(c.summary, c.continuation);
      cycles.push_back(c);
    }
  }
  EvalArtifacts view() const { return {&original, cycles}; }
};

TEST(Condition, NamesRoundTrip) {
  for (auto c : {Condition::no_context(), Condition::full_context(), Condition::compaction(3),
                 Condition::consolidated(8)}) {
    EXPECT_EQ(Condition::parse(c.name()), c);
  }
  EXPECT_EQ(Condition::compaction(2).name(), "compaction-2");
  EXPECT_EQ(Condition::parse("consolidated:12"), Condition::consolidated(12));
  EXPECT_EQ(Condition::parse("no-context"), Condition::no_context());
  for (const char* bad : {"", "context", "compaction", "compaction-0", "compaction-x", "consolidated-"}) {
    EXPECT_EQ(error_kind([&] { Condition::parse(bad); }), ErrorKind::kConfig) << bad;
  }
}

// The system prompt rule: full context gets the original transcript, each
// compaction cycle its own summary plus continuation, and no_context and
// consolidated get nothing. The question is always the only user message.
TEST(PromptMapping, AllFourConditions) {
  Artifacts a;
  Options o;
  auto q = question();

  auto none = build_prompt(Condition::no_context(), q, a.view(), o);
  ASSERT_EQ(none.messages.size(), 1u);
  EXPECT_EQ(none.messages[0].role, Role::kUser);
  EXPECT_EQ(none.messages[0].content, q.question);

  auto full = build_prompt(Condition::full_context(), q, a.view(), o);
  ASSERT_EQ(full.messages.size(), 2u);
  EXPECT_EQ(full.messages[0].role, Role::kSystem);
  EXPECT_EQ(full.messages[0].content, a.original.transcript());
  EXPECT_EQ(full.messages[1].content, q.question);

  for (int i = 1; i <= 3; ++i) {
    auto comp = build_prompt(Condition::compaction(i), q, a.view(), o);
    ASSERT_EQ(comp.messages.size(), 2u);
    EXPECT_EQ(comp.messages[0].role, Role::kSystem);
    EXPECT_EQ(comp.messages[0].content, a.cycles[i - 1].context_for_eval);
  }

  auto cons = build_prompt(Condition::consolidated(8), q, a.view(), o);
  ASSERT_EQ(cons.messages.size(), 1u);
  EXPECT_EQ(cons.messages[0].content, q.question);

  for (const auto& r : {none, full, cons}) {
    EXPECT_EQ(r.temperature, 0.0);
    EXPECT_EQ(r.max_new_tokens, 512);
  }
}

TEST(PromptMapping, MissingArtifactsAreContractErrors) {
  Artifacts a;
  Options o;
  EXPECT_EQ(error_kind([&] { build_prompt(Condition::compaction(4), question(), a.view(), o); }),
            ErrorKind::kContract);
  EXPECT_EQ(error_kind([&] { build_prompt(Condition::full_context(), question(), {}, o); }),
            ErrorKind::kContract);
}

TEST(Verdict, PassFailErrorFixtures) {
  EXPECT_EQ(parse_verdict("The answer is right.\nVERDICT: PASS"), Verdict::kPass);
  EXPECT_EQ(parse_verdict("Wrong port.\nVERDICT: FAIL\n\n  "), Verdict::kFail);
  EXPECT_EQ(parse_verdict("  VERDICT: PASS  "), Verdict::kPass);
  EXPECT_EQ(parse_verdict("VERDICT: PASS\nActually, on reflection it is wrong."), std::nullopt);
  EXPECT_EQ(parse_verdict("verdict: pass"), std::nullopt);
  EXPECT_EQ(parse_verdict("VERDICT: MAYBE"), std::nullopt);
  EXPECT_EQ(parse_verdict("VERDICT: PASS or FAIL"), std::nullopt);
  EXPECT_EQ(parse_verdict(""), std::nullopt);
}

class JudgeScript : public Provider {
 public:
  std::vector<std::string> replies;
  std::vector<ChatRequest> seen;
  ChatResponse complete(const ChatRequest& r) override {
    seen.push_back(r);
    const auto i = std::min(seen.size() - 1, replies.size() - 1);
    return {replies[i], 0, 0, false};
  }
};

TEST(Judge, RetriesThenRecordsError) {
  Options o;
  Answer ans{"q1", Condition::compaction(1), "maybe 200?", 3};
  JudgeScript judge;
  judge.replies = {"hmm", "still unsure", "no idea"};
  auto j = evaluation::judge(judge, question(), ans, o);
  EXPECT_EQ(j.verdict, Verdict::kError);
  EXPECT_EQ(judge.seen.size(), 3u);
  EXPECT_EQ(j.judge_raw, "no idea");
  std::set<std::string> digests;
  for (const auto& r : judge.seen) digests.insert(request_digest(r));
  EXPECT_EQ(digests.size(), 3u);
  EXPECT_EQ(judge.seen[1].messages.size(), 3u);
  EXPECT_EQ(judge.seen[1].messages[1].content, "hmm");
}

TEST(Judge, RecoversOnRetry) {
  Options o;
  Answer ans{"q1", Condition::no_context(), "300 seconds", 3};
  JudgeScript judge;
  judge.replies = {"unsure", "Matches.\nVERDICT: PASS"};
  auto j = evaluation::judge(judge, question(), ans, o);
  EXPECT_EQ(j.verdict, Verdict::kPass);
  EXPECT_EQ(judge.seen.size(), 2u);
  EXPECT_EQ(judge.seen[0].label, "judge/no_context/q1/attempt0");
}

TEST(Judge, PromptCarriesQuestionExpectedAndResponse) {
  auto r = judge_request(question(), {"q1", Condition::no_context(), "five minutes", 2}, Options{});
  const auto& text = r.messages.at(0).content;
  EXPECT_NE(text.find("What is the default job timeout?"), std::string::npos);
  EXPECT_NE(text.find("300 seconds."), std::string::npos);
  EXPECT_NE(text.find("five minutes"), std::string::npos);
}

TEST(Answers, IngestValidatesCoverage) {
  testing::TempDir dir;
  std::vector<TestQuestion> qs{question("q1"), question("q2")};
  const auto cond = Condition::consolidated(8);
  std::vector<Answer> good{{"q2", cond, "b", 1}, {"q1", cond, "a", 1}};
  store_answers(dir / "a.jsonl", good);
  auto got = ingest_answers(dir / "a.jsonl", cond, qs);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].question_id, "q1");

  EXPECT_EQ(error_kind([&] { ingest_answers(dir / "a.jsonl", Condition::consolidated(7), qs); }),
            ErrorKind::kSchema);
  std::vector<Answer> dup{{"q1", cond, "a", 1}, {"q1", cond, "b", 1}, {"q2", cond, "c", 1}};
  store_answers(dir / "dup.jsonl", dup);
  EXPECT_EQ(error_kind([&] { ingest_answers(dir / "dup.jsonl", cond, qs); }), ErrorKind::kSchema);
  std::vector<Answer> missing{{"q1", cond, "a", 1}};
  store_answers(dir / "missing.jsonl", missing);
  EXPECT_NE(testing::error_message([&] { ingest_answers(dir / "missing.jsonl", cond, qs); }).find("q2"),
            std::string::npos);
  std::vector<Answer> unknown{{"q1", cond, "a", 1}, {"q2", cond, "b", 1}, {"q9", cond, "c", 1}};
  store_answers(dir / "unknown.jsonl", unknown);
  EXPECT_NE(testing::error_message([&] { ingest_answers(dir / "unknown.jsonl", cond, qs); }).find("q9"),
            std::string::npos);
}

TEST(Answers, RecordWithoutConditionIsRejected) {
  testing::TempDir dir;
  {
    std::ofstream out(dir / "a.jsonl");
    out << R"({"schema":"answer","version":1})" << "\n"
        << R"({"question_id":"q1","text":"a","completion_tokens":1})" << "\n";
  }
  std::vector<TestQuestion> qs{question("q1")};
  auto msg = testing::error_message(
      [&] { ingest_answers(dir / "a.jsonl", Condition::consolidated(8), qs); });
  EXPECT_NE(msg.find("condition"), std::string::npos) << msg;
}

TEST(Score, CellsPerTypeAndOverall) {
  std::vector<TestQuestion> qs{question("q1", MemoryType::kSemantic),
                               question("q2", MemoryType::kEpisodic),
                               question("q3", MemoryType::kEpisodic),
                               question("q4", MemoryType::kEpisodic, "y")};
  const auto c = Condition::no_context();
  std::vector<Judgment> js{{"q1", c, Verdict::kPass, ""},
                           {"q2", c, Verdict::kFail, ""},
                           {"q3", c, Verdict::kError, ""},
                           {"q4", c, Verdict::kPass, ""}};
  auto scores = score(js, qs);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].conversation_id, "x");
  EXPECT_EQ(scores[0].overall, (Cell{1, 1, 1}));
  EXPECT_DOUBLE_EQ(*scores[0].overall.accuracy(), 50.0);
  EXPECT_NEAR(scores[0].overall.error_rate(), 100.0 / 3.0, 1e-12);
  EXPECT_EQ(scores[0].by_type.at(MemoryType::kEpisodic), (Cell{0, 1, 1}));
  EXPECT_FALSE((Cell{0, 0, 2}.accuracy().has_value()));

  js.push_back({"ghost", c, Verdict::kPass, ""});
  EXPECT_EQ(error_kind([&] { score(js, qs); }), ErrorKind::kIntegrity);
}

TEST(Judgments, StoreLoadRoundTrip) {
  testing::TempDir dir;
  std::vector<Judgment> js{{"q1", Condition::compaction(2), Verdict::kError, "??"},
                           {"q2", Condition::compaction(2), Verdict::kPass, "VERDICT: PASS"}};
  store_judgments(dir / "j.jsonl", js);
  EXPECT_EQ(load_judgments(dir / "j.jsonl"), js);
}

}  // namespace
}  // namespace consol::evaluation
