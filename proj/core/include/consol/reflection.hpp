#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consol/corpus.hpp"
#include "consol/provider.hpp"

namespace consol::reflection {

struct Options {
  std::string model_tag;
  double temperature = 0.0;
  int passes = 3;
  int max_new_tokens = 8192;
  int max_parallel = 4;
};

struct ExtractionPassResult {
  std::string conversation_id;
  int pass_index = 1;
  std::vector<Fact> facts;
  std::vector<std::string> warnings;
};

/// Lowercase, trim, collapse internal whitespace runs to a single space.
std::string normalize_name(std::string_view name);

/// Pass-specific nonce embedded in the extraction prompt so that passes are
/// distinct requests.
std::string pass_nonce(std::string_view conversation_id, int pass_index);

ChatRequest extraction_request(const Conversation& conversation, int pass_index,
                               const Options& options);

/// Parses the fenced jsonl block of an extraction reply. Throws
/// ExtractionParseError (carrying the raw reply) when no block is present or
/// a record is malformed or lacks name/type/content.
std::vector<Fact> parse_extraction(std::string_view reply, std::string_view conversation_id,
                                   int pass_index);

ExtractionPassResult extract_facts(Provider& provider, const Conversation& conversation,
                                   int pass_index, const Options& options);

/// Union by normalized name. On collision the fact with the lowest
/// extraction_pass wins (first occurrence among equals). Output is sorted by
/// normalized name.
std::vector<Fact> merge_facts(std::span<const Fact> facts);

/// merge_facts over all passes; passes must share one conversation_id.
std::vector<Fact> merge_passes(std::span<const ExtractionPassResult> passes);

/// Extracts `options.passes` times from each of the original and its
/// continuations, merges per conversation, and concatenates the per-conversation
/// inventories without cross-conversation deduplication.
std::vector<Fact> build_fact_inventory(Provider& provider, const Conversation& original,
                                       std::span<const Conversation> continuations,
                                       const Options& options);

}  // namespace consol::reflection
