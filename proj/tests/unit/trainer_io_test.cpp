#include <fstream>

#include <gtest/gtest.h>

#include "consol/error.hpp"
#include "consol/trainer_io.hpp"
#include "expect_error.hpp"
#include "temp_dir.hpp"

namespace consol::trainer {
namespace {

using testing::error_kind;
using testing::TempDir;

TEST(CELog, RoundTripAndPooling) {
  TempDir dir;
  std::vector<CELogRecord> records{{"q1", 3, {0.1, 0.2}, ""},
                                   {"q2", 3, {}, "empty expected answer"},
                                   {"q3", 3, {1.5}, ""},
                                   {"q1", 4, {0.05}, ""}};
  store_ce_log(dir / "ce.jsonl", records);
  auto loaded = load_ce_log(dir / "ce.jsonl");
  EXPECT_EQ(loaded, records);
  EXPECT_EQ(pooled_ces(loaded, 3), (std::vector<double>{0.1, 0.2, 1.5}));
  EXPECT_EQ(pooled_ces(loaded, 4), (std::vector<double>{0.05}));
}

TEST(CELog, InvalidValuesAreSchemaErrors) {
  TempDir dir;
  auto write = [&](const std::string& line) {
    std::ofstream out(dir / "ce.jsonl");
    out << R"({"schema":"ce_log","version":1})" << "\n" << line << "\n";
  };
  write(R"({"question_id":"q1","epoch":1,"token_ces":[0.5,-0.1]})");
  EXPECT_EQ(error_kind([&] { load_ce_log(dir / "ce.jsonl"); }), ErrorKind::kSchema);
  write(R"({"question_id":"q1","epoch":1,"token_ces":[]})");
  EXPECT_EQ(error_kind([&] { load_ce_log(dir / "ce.jsonl"); }), ErrorKind::kSchema);
  write(R"({"question_id":"q1","epoch":0,"token_ces":[0.5]})");
  EXPECT_EQ(error_kind([&] { load_ce_log(dir / "ce.jsonl"); }), ErrorKind::kSchema);
  write(R"({"question_id":"q1","token_ces":[0.5]})");
  EXPECT_NE(testing::error_message([&] { load_ce_log(dir / "ce.jsonl"); }).find("epoch"),
            std::string::npos);
}

TEST(Paths, PerEpochNames) {
  EXPECT_EQ(answers_file("out", 8).filename(), "answers_epoch_8.jsonl");
  EXPECT_EQ(ce_log_file("out", 12).filename(), "ce_epoch_12.jsonl");
}

std::filesystem::path write_script(const TempDir& dir, const std::string& body) {
  auto path = dir / "trainer.sh";
  std::ofstream(path) << "#!/bin/sh\n" << body;
  std::filesystem::permissions(path, std::filesystem::perms::owner_all);
  return path;
}

TEST(Invoke, PassesFourPathsInOrder) {
  TempDir dir;
  auto script = write_script(dir, "printf '%s\\n' \"$1\" \"$2\" \"$3\" > \"$4/args.txt\"\n");
  std::vector<std::string> command{"/bin/sh", script.string()};
  invoke(command, {dir / "ts.jsonl", dir / "manifest.json", dir / "q.jsonl", dir / "out"});
  std::ifstream in(dir / "out/args.txt");
  std::string a, b, c;
  std::getline(in, a);
  std::getline(in, b);
  std::getline(in, c);
  EXPECT_EQ(a, (dir / "ts.jsonl").string());
  EXPECT_EQ(b, (dir / "manifest.json").string());
  EXPECT_EQ(c, (dir / "q.jsonl").string());
}

TEST(Invoke, FailureQuotesErrorReport) {
  TempDir dir;
  auto script = write_script(
      dir, "echo '{\"error\": \"CUDA out of memory; reduce batch_size\"}' > \"$4/error.json\"\nexit 1\n");
  std::vector<std::string> command{"/bin/sh", script.string()};
  auto msg = testing::error_message(
      [&] { invoke(command, {dir / "a", dir / "b", dir / "c", dir / "out"}); });
  EXPECT_NE(msg.find("out of memory"), std::string::npos) << msg;
  EXPECT_NE(msg.find("exit status 1"), std::string::npos) << msg;
}

TEST(Invoke, MissingExecutable) {
  TempDir dir;
  std::vector<std::string> command{"/nonexistent/trainer"};
  EXPECT_EQ(error_kind([&] { invoke(command, {dir / "a", dir / "b", dir / "c", dir / "out"}); }),
            ErrorKind::kDependency);
}

}  // namespace
}  // namespace consol::trainer
