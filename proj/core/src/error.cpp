#include "consol/error.hpp"

namespace consol {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchema: return "schema error";
    case ErrorKind::kConflict: return "conflict error";
    case ErrorKind::kIntegrity: return "integrity error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kProvider: return "provider error";
    case ErrorKind::kMissingFixture: return "missing fixture";
    case ErrorKind::kPartialOutput: return "partial output";
    case ErrorKind::kBudget: return "budget error";
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kDependency: return "dependency error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kDependency: return 3;
    case ErrorKind::kProvider:
    case ErrorKind::kMissingFixture: return 4;
    case ErrorKind::kBudget:
    case ErrorKind::kLength: return 5;
    default: return 1;
  }
}

std::string excerpt(std::string_view text, std::size_t max_bytes) {
  if (text.size() <= max_bytes) return std::string(text);
  return std::string(text.substr(0, max_bytes)) + "...";
}

}  // namespace consol
