#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "consol/corpus.hpp"
#include "consol/error.hpp"
#include "consol/provider.hpp"

namespace consol::synthesis {

struct Options {
  std::string model_tag;
  double temperature = 0.7;
  int paraphrases = 20;
  /// A fact is accepted with at least this many examples after one top-up.
  int min_per_fact = 18;
  int max_new_tokens = 16384;
  int max_parallel = 4;
};

struct SynthesisResult {
  std::vector<SyntheticExample> examples;
  std::vector<std::string> warnings;
};

/// Raised when a reply yields fewer than the requested number of usable
/// exchanges. Carries what did parse so the caller can top up.
class PartialOutputError : public Error {
 public:
  PartialOutputError(SynthesisResult parsed, int requested, const std::string& message)
      : Error(ErrorKind::kPartialOutput, message),
        parsed_(std::move(parsed)),
        requested_(requested) {}

  const SynthesisResult& parsed() const noexcept { return parsed_; }
  int parsed_count() const noexcept { return static_cast<int>(parsed_.examples.size()); }
  int requested() const noexcept { return requested_; }

 private:
  SynthesisResult parsed_;
  int requested_;
};

/// Styles cycled in canonical order starting at `offset`: with n = 20 each of
/// the six styles appears at least three times.
std::vector<Style> style_plan(int n, int offset = 0);

/// `topup_offset` > 0 marks a top-up request for the remaining exchanges.
ChatRequest synthesis_request(const Fact& fact, int n, const Options& options,
                              int topup_offset = 0);

/// Parses a synthesis reply. Records that are not a [user, assistant] pair
/// are dropped with a warning. At most `n` examples are kept.
SynthesisResult parse_synthesis(std::string_view reply, const Fact& fact, int n);

/// Throws PartialOutputError when fewer than n exchanges parse.
SynthesisResult synthesize_examples(Provider& provider, const Fact& fact, int n,
                                    const Options& options);

/// Fisher-Yates with a splitmix64 stream: identical output on every platform
/// for the same seed.
void deterministic_shuffle(std::vector<SyntheticExample>& examples, std::uint64_t seed);

/// Synthesizes for every fact (one top-up on shortfall, then at least
/// min_per_fact required), concatenates, and shuffles by manifest.seed.
TrainingSet assemble_training_set(Provider& provider, const std::string& conversation_id,
                                  std::span<const Fact> facts, const Manifest& manifest,
                                  const Options& options);

}  // namespace consol::synthesis
