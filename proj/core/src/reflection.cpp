#include "consol/reflection.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "consol/digest.hpp"
#include "consol/error.hpp"
#include "consol/prompts.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace consol::reflection {

std::string normalize_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char ch : detail::trim(name)) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string pass_nonce(std::string_view conversation_id, int pass_index) {
  return sha256_hex(fmt::format("reflect:{}:{}", conversation_id, pass_index)).substr(0, 12);
}

ChatRequest extraction_request(const Conversation& conversation, int pass_index,
                               const Options& options) {
  ChatRequest req;
  req.model_tag = options.model_tag;
  req.temperature = options.temperature;
  req.max_new_tokens = options.max_new_tokens;
  req.label = fmt::format("reflect/{}/pass{}", conversation.id, pass_index);
  req.messages.push_back(
      Turn{Role::kUser, render_prompt("extract_facts",
                                      {{"pass", std::to_string(pass_index)},
                                       {"nonce", pass_nonce(conversation.id, pass_index)},
                                       {"conversation_id", conversation.id},
                                       {"transcript", conversation.transcript()}})});
  return req;
}

std::vector<Fact> parse_extraction(std::string_view reply, std::string_view conversation_id,
                                   int pass_index) {
  auto block = detail::first_fenced_block(reply);
  if (!block) {
    throw ExtractionParseError(std::string(reply),
                               fmt::format("extraction reply for {} pass {} has no fenced block",
                                           conversation_id, pass_index));
  }
  std::vector<Fact> facts;
  int line_no = 0;
  for (std::string_view line : detail::split_lines(*block)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    const std::string where =
        fmt::format("extraction {} pass {} line {}", conversation_id, pass_index, line_no);
    if (rec.is_discarded() || !rec.is_object()) {
      throw ExtractionParseError(std::string(reply), where + ": not a JSON object");
    }
    Fact f;
    try {
      f.name = require_string(rec, "name", where);
      auto type_text = require_string(rec, "type", where);
      auto type = parse_memory_type(type_text);
      if (!type) {
        throw Error(ErrorKind::kSchema,
                    fmt::format("{}: field 'type': unknown memory type '{}'", where, type_text));
      }
      f.type = *type;
      f.content = require_string(rec, "content", where);
    } catch (const Error& e) {
      throw ExtractionParseError(std::string(reply), e.what());
    }
    if (normalize_name(f.name).empty() || detail::trim(f.content).empty()) {
      throw ExtractionParseError(std::string(reply), where + ": empty name or content");
    }
    f.source_conversation_id = std::string(conversation_id);
    f.extraction_pass = pass_index;
    f.id = fmt::format("{}/p{}/f{:03}", conversation_id, pass_index, facts.size() + 1);
    facts.push_back(std::move(f));
  }
  return facts;
}

ExtractionPassResult extract_facts(Provider& provider, const Conversation& conversation,
                                   int pass_index, const Options& options) {
  if (pass_index < 1 || pass_index > 3) {
    throw Error(ErrorKind::kContract, fmt::format("pass index {} outside 1..3", pass_index));
  }
  ChatResponse reply = provider.complete(extraction_request(conversation, pass_index, options));
  ExtractionPassResult result;
  result.conversation_id = conversation.id;
  result.pass_index = pass_index;
  result.facts = parse_extraction(reply.content, conversation.id, pass_index);
  if (result.facts.empty()) {
    result.warnings.push_back(
        fmt::format("extraction pass {} for {} returned no facts", pass_index, conversation.id));
    spdlog::warn("{}", result.warnings.back());
  }
  return result;
}

std::vector<Fact> merge_facts(std::span<const Fact> facts) {
  std::map<std::string, const Fact*> winners;
  for (const Fact& f : facts) {
    std::string key = normalize_name(f.name);
    auto [it, inserted] = winners.emplace(key, &f);
    if (!inserted && f.extraction_pass < it->second->extraction_pass) it->second = &f;
  }
  std::vector<Fact> out;
  out.reserve(winners.size());
  for (const auto& [key, f] : winners) out.push_back(*f);
  return out;
}

std::vector<Fact> merge_passes(std::span<const ExtractionPassResult> passes) {
  if (passes.empty()) return {};
  for (const auto& p : passes) {
    if (p.conversation_id != passes.front().conversation_id) {
      throw Error(ErrorKind::kContract,
                  fmt::format("merge_passes: mixed conversation ids '{}' and '{}'",
                              passes.front().conversation_id, p.conversation_id));
    }
  }
  std::vector<const ExtractionPassResult*> ordered;
  for (const auto& p : passes) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return a->pass_index < b->pass_index;
  });
  std::vector<Fact> all;
  for (const auto* p : ordered) all.insert(all.end(), p->facts.begin(), p->facts.end());
  return merge_facts(all);
}

std::vector<Fact> build_fact_inventory(Provider& provider, const Conversation& original,
                                       std::span<const Conversation> continuations,
                                       const Options& options) {
  std::vector<const Conversation*> sources{&original};
  for (const auto& c : continuations) sources.push_back(&c);
  const auto passes = static_cast<std::size_t>(options.passes);
  std::vector<ExtractionPassResult> results(sources.size() * passes);
  detail::parallel_for(results.size(), options.max_parallel, [&](std::size_t i) {
    results[i] = extract_facts(provider, *sources[i / passes], static_cast<int>(i % passes) + 1,
                               options);
  });
  std::vector<Fact> inventory;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    std::span<const ExtractionPassResult> per(results.data() + s * passes, passes);
    auto merged = merge_passes(per);
    inventory.insert(inventory.end(), merged.begin(), merged.end());
  }
  return inventory;
}

}  // namespace consol::reflection
