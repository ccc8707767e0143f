#include <gtest/gtest.h>

#include "consol/config.hpp"
#include "consol/error.hpp"
#include "expect_error.hpp"
#include "temp_dir.hpp"

namespace consol {
namespace {

using testing::error_kind;

TEST(Config, DefaultsCarryProtocolConstants) {
  auto c = RunConfig::from_json(json::object(), "/base");
  EXPECT_EQ(c.reflection.passes, 3);
  EXPECT_EQ(c.synthesis.paraphrases, 20);
  EXPECT_EQ(c.synthesis.min_per_fact, 18);
  EXPECT_EQ(c.compaction.ratio, 6);
  EXPECT_EQ(c.compaction.cycles, 3);
  EXPECT_DOUBLE_EQ(c.compaction.summary_tolerance, 1.2);
  EXPECT_EQ(c.compaction.continuation_tokens, 60000);
  EXPECT_EQ(c.evaluation.max_new_tokens, 512);
  EXPECT_EQ(c.manifest.epochs, 8);
  EXPECT_EQ(c.consolidated_epochs(), std::vector<int>{8});
  EXPECT_EQ(c.provider_mode, ProviderMode::kLive);
}

TEST(Config, OverridesAndRelativePaths) {
  json j{{"corpus_dir", "corpus"},
         {"compaction", {{"ratio", 4}, {"cycles", 2}}},
         {"providers", {{"judge", {{"model", "j"}, {"max_concurrent", 2}}}}},
         {"evaluation", {{"epochs_sweep", 12}}}};
  auto c = RunConfig::from_json(j, "/base/dir");
  EXPECT_EQ(c.corpus_dir, std::filesystem::path("/base/dir/corpus"));
  EXPECT_EQ(c.compaction.ratio, 4);
  EXPECT_EQ(c.judge.provider.max_concurrent, 2);
  EXPECT_EQ(c.evaluation.judge_model_tag, "j");
  EXPECT_EQ(c.consolidated_epochs().size(), 12u);
  auto round = RunConfig::from_json(c.to_json(), "/elsewhere");
  EXPECT_EQ(round.to_json(), c.to_json());
}

TEST(Config, InvalidInputsAreConfigErrors) {
  for (const json& j : {json{{"corpus_dri", "x"}}, json{{"compaction", {{"ratio", 0}}}},
                        json{{"compaction", {{"ratio", "six"}}}},
                        json{{"reflection", {{"passes", 4}}}},
                        json{{"synthesis", {{"min_per_fact", 21}}}},
                        json{{"provider", "offline"}},
                        json{{"providers", {{"assistant", {{"endpoint", "x"}}}}}},
                        json{{"manifest", {{"lora_rank", "big"}}}}}) {
    EXPECT_EQ(error_kind([&] { RunConfig::from_json(j, "/"); }), ErrorKind::kConfig) << j.dump();
  }
  EXPECT_EQ(error_kind([] { RunConfig::load("/nonexistent/config.json"); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace consol
