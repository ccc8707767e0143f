#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "consol/corpus.hpp"
#include "consol/provider.hpp"

namespace consol::testing {

/// Answers requests by their label from the micro-fixture script
/// (tests/fixtures/micro/source). Used to author replay fixtures and in tests
/// that need a deterministic model without fixture files.
class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(std::filesystem::path source_dir);

  ChatResponse complete(const ChatRequest& request) override;

  const json& script() const { return script_; }
  int calls() const { return calls_.load(); }

  /// Whether `qid` passes under `condition` ("consolidated-<e>" included).
  bool passes(const std::string& condition, const std::string& qid) const;
  bool judge_errors(const std::string& condition, const std::string& qid) const;

  std::vector<TestQuestion> questions() const;
  Conversation original() const;
  Conversation continuation(int cycle) const;

 private:
  std::string reflection_reply(const std::string& conversation_id, int pass) const;
  std::string synthesis_reply(const std::string& fact_id, bool topup) const;
  std::string answer_reply(const std::string& condition, const std::string& qid) const;
  std::string judge_reply(const std::string& condition, const std::string& qid) const;
  std::string read_source(const std::string& name) const;

  std::filesystem::path dir_;
  json script_;
  std::atomic<int> calls_{0};
};

std::filesystem::path micro_dir();

}  // namespace consol::testing
