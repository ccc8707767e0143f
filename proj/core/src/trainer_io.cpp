#include "consol/trainer_io.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "consol/error.hpp"

namespace consol::trainer {

namespace fs = std::filesystem;

json to_json(const CELogRecord& record) {
  json j{{"question_id", record.question_id},
         {"epoch", record.epoch},
         {"token_ces", record.token_ces}};
  if (!record.error.empty()) j["error"] = record.error;
  return j;
}

CELogRecord ce_record_from_json(const json& j, std::string_view where) {
  CELogRecord r;
  r.question_id = require_string(j, "question_id", where);
  r.epoch = static_cast<int>(require_int(j, "epoch", where));
  if (j.contains("error")) r.error = require_string(j, "error", where);
  for (const auto& v : require_array(j, "token_ces", where)) {
    if (!v.is_number()) {
      throw Error(ErrorKind::kSchema, fmt::format("{}: field 'token_ces' must hold numbers", where));
    }
    double ce = v.get<double>();
    if (!std::isfinite(ce) || ce < 0.0) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'token_ces' has invalid value {}", where, ce));
    }
    r.token_ces.push_back(ce);
  }
  if (r.epoch < 1) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'epoch' must be >= 1", where));
  }
  if (r.token_ces.empty() && r.error.empty()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'token_ces' is empty without an error", where));
  }
  return r;
}

void store_ce_log(const fs::path& path, std::span<const CELogRecord> records) {
  std::vector<json> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_json(r));
  write_records(path, kCELogSchema, out);
}

std::vector<CELogRecord> load_ce_log(const fs::path& path) {
  std::vector<CELogRecord> out;
  auto records = read_records(path, kCELogSchema);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(
        ce_record_from_json(records[i], fmt::format("{}:{}", path.string(), i + 2)));
  }
  return out;
}

std::vector<double> pooled_ces(std::span<const CELogRecord> records, int epoch) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.epoch != epoch || !r.error.empty()) continue;
    out.insert(out.end(), r.token_ces.begin(), r.token_ces.end());
  }
  return out;
}

fs::path answers_file(const fs::path& out_dir, int epoch) {
  return out_dir / fmt::format("answers_epoch_{}.jsonl", epoch);
}

fs::path ce_log_file(const fs::path& out_dir, int epoch) {
  return out_dir / fmt::format("ce_epoch_{}.jsonl", epoch);
}

fs::path error_report_file(const fs::path& out_dir) { return out_dir / "error.json"; }

void invoke(std::span<const std::string> command, const Invocation& paths) {
  if (command.empty()) throw Error(ErrorKind::kConfig, "trainer command is empty");
  std::vector<std::string> args(command.begin(), command.end());
  args.push_back(paths.training_set.string());
  args.push_back(paths.manifest.string());
  args.push_back(paths.questions.string());
  args.push_back(paths.out_dir.string());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  fs::create_directories(paths.out_dir);
  spdlog::info("invoking trainer: {}", args.front());
  pid_t pid = fork();
  if (pid < 0) {
    throw Error(ErrorKind::kDependency, fmt::format("fork failed: {}", std::strerror(errno)));
  }
  if (pid == 0) {
    execvp(argv[0], argv.data());
    _exit(127);
  }
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) {
      throw Error(ErrorKind::kIo, fmt::format("waitpid failed: {}", std::strerror(errno)));
    }
  }
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return;

  std::string detail;
  if (WIFEXITED(status)) {
    detail = fmt::format("exit status {}", WEXITSTATUS(status));
    if (WEXITSTATUS(status) == 127) detail += " (command not found?)";
  } else {
    detail = "terminated by a signal";
  }
  const fs::path report = error_report_file(paths.out_dir);
  if (fs::exists(report)) {
    try {
      detail += ": " + excerpt(read_json_file(report).dump(), 500);
    } catch (const std::exception&) {
      detail += ": unreadable error report";
    }
  }
  throw Error(ErrorKind::kDependency, fmt::format("trainer failed with {}", detail));
}

}  // namespace consol::trainer
