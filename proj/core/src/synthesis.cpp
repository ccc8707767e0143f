#include "consol/synthesis.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "consol/prompts.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace consol::synthesis {

std::vector<Style> style_plan(int n, int offset) {
  std::vector<Style> plan;
  constexpr int kCount = static_cast<int>(std::size(kStyles));
  for (int i = 0; i < n; ++i) plan.push_back(kStyles[(offset + i) % kCount]);
  return plan;
}

namespace {

std::string_view framing_prompt(MemoryType type) {
  switch (type) {
    case MemoryType::kSemantic: return "framing_semantic";
    case MemoryType::kProcedural: return "framing_procedural";
    case MemoryType::kEpisodic: return "framing_episodic";
  }
  return "framing_episodic";
}

}  // namespace

ChatRequest synthesis_request(const Fact& fact, int n, const Options& options, int topup_offset) {
  std::vector<std::string> style_names;
  for (Style s : style_plan(n, topup_offset)) style_names.emplace_back(to_string(s));
  std::string note;
  if (topup_offset > 0) {
    note = fmt::format(
        "This is a top-up request: {} exchanges were already written for this memory, so make "
        "these {} different from typical phrasings.\n",
        topup_offset, n);
  }
  ChatRequest req;
  req.model_tag = options.model_tag;
  req.temperature = options.temperature;
  req.max_new_tokens = options.max_new_tokens;
  req.label = topup_offset > 0 ? fmt::format("synthesize-topup/{}", fact.id)
                               : fmt::format("synthesize/{}", fact.id);
  req.messages.push_back(Turn{
      Role::kUser,
      render_prompt("synthesize", {{"count", std::to_string(n)},
                                   {"type", std::string(to_string(fact.type))},
                                   {"fact_name", fact.name},
                                   {"fact_content", fact.content},
                                   {"framing", std::string(detail::trim(
                                                   prompt_text(framing_prompt(fact.type))))},
                                   {"styles", fmt::format("{}", fmt::join(style_names, ", "))},
                                   {"note", note}})});
  return req;
}

SynthesisResult parse_synthesis(std::string_view reply, const Fact& fact, int n) {
  SynthesisResult result;
  auto block = detail::first_fenced_block(reply);
  if (!block) {
    result.warnings.push_back(fmt::format("synthesis reply for {} has no fenced block", fact.id));
    return result;
  }
  int line_no = 0;
  for (std::string_view line : detail::split_lines(*block)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("messages") ||
        !rec["messages"].is_array()) {
      result.warnings.push_back(
          fmt::format("{} line {}: dropped, not an exchange record", fact.id, line_no));
      continue;
    }
    SyntheticExample ex;
    ex.fact_id = fact.id;
    auto style = parse_style(rec.value("style", ""));
    if (!style) {
      result.warnings.push_back(fmt::format("{} line {}: dropped, unknown style", fact.id, line_no));
      continue;
    }
    ex.style = *style;
    bool ok = true;
    for (const auto& m : rec["messages"]) {
      if (!m.is_object() || !m.contains("role") || !m.contains("content") ||
          !m["role"].is_string() || !m["content"].is_string()) {
        ok = false;
        break;
      }
      auto role = parse_role(m["role"].get<std::string>());
      if (!role) {
        ok = false;
        break;
      }
      ex.messages.push_back(Turn{*role, m["content"].get<std::string>()});
    }
    if (!ok || !is_two_message_exchange(ex.messages)) {
      result.warnings.push_back(fmt::format(
          "{} line {}: dropped, expected exactly [user, assistant] messages", fact.id, line_no));
      continue;
    }
    result.examples.push_back(std::move(ex));
  }
  if (static_cast<int>(result.examples.size()) > n) {
    result.warnings.push_back(fmt::format("{}: {} exchanges returned, keeping the first {}",
                                          fact.id, result.examples.size(), n));
    result.examples.resize(static_cast<std::size_t>(n));
  }
  return result;
}

namespace {

SynthesisResult request_examples(Provider& provider, const Fact& fact, int n,
                                 const Options& options, int topup_offset) {
  ChatResponse reply = provider.complete(synthesis_request(fact, n, options, topup_offset));
  SynthesisResult result = parse_synthesis(reply.content, fact, n);
  for (const auto& w : result.warnings) spdlog::warn("synthesis: {}", w);
  if (static_cast<int>(result.examples.size()) < n) {
    const int parsed = static_cast<int>(result.examples.size());
    throw PartialOutputError(std::move(result), n,
                             fmt::format("synthesis for {} parsed {} of {} exchanges", fact.id,
                                         parsed, n));
  }
  return result;
}

}  // namespace

SynthesisResult synthesize_examples(Provider& provider, const Fact& fact, int n,
                                    const Options& options) {
  if (n < 1) throw Error(ErrorKind::kContract, "synthesize_examples: n must be >= 1");
  return request_examples(provider, fact, n, options, 0);
}

void deterministic_shuffle(std::vector<SyntheticExample>& examples, std::uint64_t seed) {
  std::uint64_t state = seed;
  auto next = [&state] {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  for (std::size_t i = examples.size(); i > 1; --i) {
    // Rejection sampling for an unbiased index in [0, i).
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    std::swap(examples[i - 1], examples[r % bound]);
  }
}

TrainingSet assemble_training_set(Provider& provider, const std::string& conversation_id,
                                  std::span<const Fact> facts, const Manifest& manifest,
                                  const Options& options) {
  if (facts.empty()) {
    throw Error(ErrorKind::kContract,
                fmt::format("assemble_training_set: no facts for {}", conversation_id));
  }
  const int n = options.paraphrases;
  std::vector<std::vector<SyntheticExample>> per_fact(facts.size());
  detail::parallel_for(facts.size(), options.max_parallel, [&](std::size_t i) {
    const Fact& fact = facts[i];
    std::vector<SyntheticExample> got;
    try {
      got = request_examples(provider, fact, n, options, 0).examples;
    } catch (const PartialOutputError& first) {
      got = first.parsed().examples;
      const int missing = n - static_cast<int>(got.size());
      spdlog::info("synthesis: topping up {} with {} more exchanges", fact.id, missing);
      try {
        auto extra = request_examples(provider, fact, missing, options, static_cast<int>(got.size()));
        got.insert(got.end(), extra.examples.begin(), extra.examples.end());
      } catch (const PartialOutputError& second) {
        const auto& extra = second.parsed().examples;
        got.insert(got.end(), extra.begin(), extra.end());
      }
    }
    if (got.empty() || static_cast<int>(got.size()) < options.min_per_fact) {
      throw Error(ErrorKind::kPartialOutput,
                  fmt::format("fact {} ('{}') has {} usable examples after top-up, need {}",
                              fact.id, fact.name, got.size(), options.min_per_fact));
    }
    per_fact[i] = std::move(got);
  });

  TrainingSet set;
  set.conversation_id = conversation_id;
  set.manifest = manifest;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    set.per_fact_counts[facts[i].id] = static_cast<int>(per_fact[i].size());
    set.examples.insert(set.examples.end(), per_fact[i].begin(), per_fact[i].end());
  }
  deterministic_shuffle(set.examples, manifest.seed);
  return set;
}

}  // namespace consol::synthesis
