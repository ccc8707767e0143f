#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "consol/jsonl.hpp"

namespace consol::trainer {

/// Per-token cross-entropy (nats) of one expected answer at one epoch. A
/// non-empty `error` marks a question the trainer could not score.
struct CELogRecord {
  std::string question_id;
  int epoch = 0;
  std::vector<double> token_ces;
  std::string error;

  friend bool operator==(const CELogRecord&, const CELogRecord&) = default;
};

inline constexpr std::string_view kCELogSchema = "ce_log";

json to_json(const CELogRecord& record);
CELogRecord ce_record_from_json(const json& j, std::string_view where);

void store_ce_log(const std::filesystem::path& path, std::span<const CELogRecord> records);
/// Negative or non-finite values, and empty token lists without an error,
/// raise schema errors.
std::vector<CELogRecord> load_ce_log(const std::filesystem::path& path);

/// Per-token CE values of every scored record at `epoch`, in file order.
std::vector<double> pooled_ces(std::span<const CELogRecord> records, int epoch);

std::filesystem::path answers_file(const std::filesystem::path& out_dir, int epoch);
std::filesystem::path ce_log_file(const std::filesystem::path& out_dir, int epoch);
std::filesystem::path error_report_file(const std::filesystem::path& out_dir);

struct Invocation {
  std::filesystem::path training_set;
  std::filesystem::path manifest;
  std::filesystem::path questions;
  std::filesystem::path out_dir;
};

/// Runs `command` with the four paths appended, waiting for it to exit.
/// Exit status 0 is success; anything else raises an error quoting the
/// trainer's error report when one was written.
void invoke(std::span<const std::string> command, const Invocation& paths);

}  // namespace consol::trainer
