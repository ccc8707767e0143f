#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace consol {

enum class ErrorKind {
  kSchema,          // malformed file or record
  kConflict,        // duplicate identifiers
  kIntegrity,       // dangling cross-references
  kContract,        // precondition violated by the caller
  kParse,           // provider output could not be parsed
  kProvider,        // transport / HTTP failure after retries
  kMissingFixture,  // replay provider has no answer for a request
  kPartialOutput,   // fewer records than requested
  kBudget,          // summary over its token budget
  kLength,          // continuation outside its length window
  kDegenerate,      // statistic undefined for the input
  kConfig,
  kDependency,      // stage prerequisites missing
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for an error surfacing at the CLI boundary.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body_excerpt, const std::string& message)
      : Error(ErrorKind::kProvider, message),
        status_(status),
        body_excerpt_(std::move(body_excerpt)) {}

  /// HTTP status of the last attempt, 0 when the transport never got a reply.
  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class ExtractionParseError : public Error {
 public:
  ExtractionParseError(std::string raw, const std::string& message)
      : Error(ErrorKind::kParse, message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class BudgetError : public Error {
 public:
  BudgetError(long actual, long target, const std::string& message)
      : Error(ErrorKind::kBudget, message), actual_(actual), target_(target) {}

  long actual() const noexcept { return actual_; }
  long target() const noexcept { return target_; }

 private:
  long actual_;
  long target_;
};

// Keeps the first `max_bytes` of a body for error messages.
std::string excerpt(std::string_view text, std::size_t max_bytes = 200);

}  // namespace consol
