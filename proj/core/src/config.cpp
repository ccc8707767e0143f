#include "consol/config.hpp"

#include <set>

#include <fmt/format.h>

#include "consol/error.hpp"

namespace consol {

namespace fs = std::filesystem;

ProviderMode parse_provider_mode(std::string_view text) {
  if (text == "live") return ProviderMode::kLive;
  if (text == "replay") return ProviderMode::kReplay;
  throw Error(ErrorKind::kConfig, fmt::format("unknown provider mode '{}'", text));
}

std::string_view to_string(ProviderMode mode) {
  return mode == ProviderMode::kLive ? "live" : "replay";
}

namespace {

void check_keys(const json& j, std::string_view section, std::set<std::string> allowed) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kConfig, fmt::format("config section '{}' must be an object", section));
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorKind::kConfig, fmt::format("config: unknown key '{}.{}'", section, key));
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::kConfig, fmt::format("config: '{}.{}' has the wrong type", section, key));
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return fs::weakly_canonical(path.is_absolute() ? path : base / path);
}

void positive(long value, std::string_view what) {
  if (value < 1) throw Error(ErrorKind::kConfig, fmt::format("config: {} must be positive", what));
}

RoleConfig read_role(const json& j, std::string_view name, const fs::path& base) {
  RoleConfig r;
  const std::string key(name);
  if (!j.contains(key)) return r;
  const json& s = j.at(key);
  const std::string section = fmt::format("providers.{}", name);
  check_keys(s, section,
             {"model", "endpoint_url", "auth_token_env_var", "max_concurrent", "max_retries",
              "backoff_base_ms", "timeout_ms", "cache_dir"});
  read(s, "model", r.model_tag, section);
  read(s, "endpoint_url", r.provider.endpoint_url, section);
  read(s, "auth_token_env_var", r.provider.auth_token_env_var, section);
  read(s, "max_concurrent", r.provider.max_concurrent, section);
  read(s, "max_retries", r.provider.max_retries, section);
  long backoff = r.provider.backoff_base.count();
  long timeout = r.provider.timeout.count();
  read(s, "backoff_base_ms", backoff, section);
  read(s, "timeout_ms", timeout, section);
  r.provider.backoff_base = std::chrono::milliseconds(backoff);
  r.provider.timeout = std::chrono::milliseconds(timeout);
  std::string cache;
  read(s, "cache_dir", cache, section);
  r.provider.cache_dir = resolve(base, cache);
  positive(r.provider.max_concurrent, section + ".max_concurrent");
  if (r.provider.max_retries < 0) {
    throw Error(ErrorKind::kConfig, fmt::format("config: {}.max_retries must be >= 0", section));
  }
  return r;
}

json role_json(const RoleConfig& r) {
  return json{{"model", r.model_tag},
              {"endpoint_url", r.provider.endpoint_url},
              {"auth_token_env_var", r.provider.auth_token_env_var},
              {"max_concurrent", r.provider.max_concurrent},
              {"max_retries", r.provider.max_retries},
              {"backoff_base_ms", r.provider.backoff_base.count()},
              {"timeout_ms", r.provider.timeout.count()},
              {"cache_dir", r.provider.cache_dir.string()}};
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"corpus_dir", "questions_file", "fixtures_dir", "provider", "providers",
              "reflection", "synthesis", "compaction", "evaluation", "manifest", "trainer",
              "max_parallel"});
  RunConfig c;
  std::string s;
  read(j, "corpus_dir", s, "config");
  c.corpus_dir = resolve(base_dir, s);
  s.clear();
  read(j, "questions_file", s, "config");
  c.questions_file = resolve(base_dir, s);
  s.clear();
  read(j, "fixtures_dir", s, "config");
  c.fixtures_dir = resolve(base_dir, s);
  if (j.contains("provider")) {
    std::string mode;
    read(j, "provider", mode, "config");
    c.provider_mode = parse_provider_mode(mode);
  }
  read(j, "max_parallel", c.max_parallel, "config");
  positive(c.max_parallel, "max_parallel");

  if (j.contains("providers")) {
    const json& p = j.at("providers");
    check_keys(p, "providers", {"assistant", "judge", "base_model"});
    c.assistant = read_role(p, "assistant", base_dir);
    c.judge = read_role(p, "judge", base_dir);
    c.base_model = read_role(p, "base_model", base_dir);
  }

  if (j.contains("reflection")) {
    const json& r = j.at("reflection");
    check_keys(r, "reflection", {"passes", "temperature", "max_new_tokens"});
    read(r, "passes", c.reflection.passes, "reflection");
    read(r, "temperature", c.reflection.temperature, "reflection");
    read(r, "max_new_tokens", c.reflection.max_new_tokens, "reflection");
  }
  if (c.reflection.passes < 1 || c.reflection.passes > 3) {
    throw Error(ErrorKind::kConfig, "config: reflection.passes must be 1..3");
  }

  if (j.contains("synthesis")) {
    const json& r = j.at("synthesis");
    check_keys(r, "synthesis", {"paraphrases", "min_per_fact", "temperature", "max_new_tokens"});
    read(r, "paraphrases", c.synthesis.paraphrases, "synthesis");
    read(r, "min_per_fact", c.synthesis.min_per_fact, "synthesis");
    read(r, "temperature", c.synthesis.temperature, "synthesis");
    read(r, "max_new_tokens", c.synthesis.max_new_tokens, "synthesis");
  }
  positive(c.synthesis.paraphrases, "synthesis.paraphrases");
  if (c.synthesis.min_per_fact < 1 || c.synthesis.min_per_fact > c.synthesis.paraphrases) {
    throw Error(ErrorKind::kConfig, "config: synthesis.min_per_fact must be 1..paraphrases");
  }

  if (j.contains("compaction")) {
    const json& r = j.at("compaction");
    check_keys(r, "compaction",
               {"ratio", "cycles", "summary_tolerance", "continuation_tokens",
                "continuation_tolerance", "summary_temperature", "continuation_temperature",
                "prefer_provider_usage"});
    read(r, "ratio", c.compaction.ratio, "compaction");
    read(r, "cycles", c.compaction.cycles, "compaction");
    read(r, "summary_tolerance", c.compaction.summary_tolerance, "compaction");
    read(r, "continuation_tokens", c.compaction.continuation_tokens, "compaction");
    read(r, "continuation_tolerance", c.compaction.continuation_tolerance, "compaction");
    read(r, "summary_temperature", c.compaction.summary_temperature, "compaction");
    read(r, "continuation_temperature", c.compaction.continuation_temperature, "compaction");
    read(r, "prefer_provider_usage", c.compaction.prefer_provider_usage, "compaction");
  }
  positive(c.compaction.ratio, "compaction.ratio");
  positive(c.compaction.cycles, "compaction.cycles");
  positive(c.compaction.continuation_tokens, "compaction.continuation_tokens");
  if (c.compaction.summary_tolerance < 1.0) {
    throw Error(ErrorKind::kConfig, "config: compaction.summary_tolerance must be >= 1");
  }
  if (c.compaction.continuation_tolerance < 0.0 || c.compaction.continuation_tolerance >= 1.0) {
    throw Error(ErrorKind::kConfig, "config: compaction.continuation_tolerance must be in [0, 1)");
  }

  if (j.contains("evaluation")) {
    const json& r = j.at("evaluation");
    check_keys(r, "evaluation",
               {"max_new_tokens", "judge_retries", "judge_max_new_tokens", "epochs_sweep"});
    read(r, "max_new_tokens", c.evaluation.max_new_tokens, "evaluation");
    read(r, "judge_retries", c.evaluation.judge_retries, "evaluation");
    read(r, "judge_max_new_tokens", c.evaluation.judge_max_new_tokens, "evaluation");
    read(r, "epochs_sweep", c.epochs_sweep, "evaluation");
  }
  positive(c.evaluation.max_new_tokens, "evaluation.max_new_tokens");
  if (c.evaluation.judge_retries < 0 || c.epochs_sweep < 0) {
    throw Error(ErrorKind::kConfig, "config: judge_retries and epochs_sweep must be >= 0");
  }

  if (j.contains("manifest")) {
    try {
      c.manifest = manifest_from_json(j.at("manifest"), "config manifest");
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, e.what());
    }
  }

  if (j.contains("trainer")) {
    const json& r = j.at("trainer");
    check_keys(r, "trainer", {"command", "outputs_dir"});
    read(r, "command", c.trainer.command, "trainer");
    std::string dir;
    read(r, "outputs_dir", dir, "trainer");
    c.trainer.outputs_dir = resolve(base_dir, dir);
  }

  c.reflection.model_tag = c.assistant.model_tag;
  c.synthesis.model_tag = c.assistant.model_tag;
  c.compaction.model_tag = c.assistant.model_tag;
  c.evaluation.answer_model_tag = c.base_model.model_tag;
  c.evaluation.judge_model_tag = c.judge.model_tag;
  c.reflection.max_parallel = c.max_parallel;
  c.synthesis.max_parallel = c.max_parallel;
  c.evaluation.max_parallel = c.max_parallel;
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("cannot read config: {}", e.what()));
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
  return json{
      {"corpus_dir", corpus_dir.string()},
      {"questions_file", questions_file.string()},
      {"fixtures_dir", fixtures_dir.string()},
      {"provider", to_string(provider_mode)},
      {"providers",
       {{"assistant", role_json(assistant)},
        {"judge", role_json(judge)},
        {"base_model", role_json(base_model)}}},
      {"reflection",
       {{"passes", reflection.passes},
        {"temperature", reflection.temperature},
        {"max_new_tokens", reflection.max_new_tokens}}},
      {"synthesis",
       {{"paraphrases", synthesis.paraphrases},
        {"min_per_fact", synthesis.min_per_fact},
        {"temperature", synthesis.temperature},
        {"max_new_tokens", synthesis.max_new_tokens}}},
      {"compaction",
       {{"ratio", compaction.ratio},
        {"cycles", compaction.cycles},
        {"summary_tolerance", compaction.summary_tolerance},
        {"continuation_tokens", compaction.continuation_tokens},
        {"continuation_tolerance", compaction.continuation_tolerance},
        {"summary_temperature", compaction.summary_temperature},
        {"continuation_temperature", compaction.continuation_temperature},
        {"prefer_provider_usage", compaction.prefer_provider_usage}}},
      {"evaluation",
       {{"max_new_tokens", evaluation.max_new_tokens},
        {"judge_retries", evaluation.judge_retries},
        {"judge_max_new_tokens", evaluation.judge_max_new_tokens},
        {"epochs_sweep", epochs_sweep}}},
      {"manifest", consol::to_json(manifest)},
      {"trainer", {{"command", trainer.command}, {"outputs_dir", trainer.outputs_dir.string()}}},
      {"max_parallel", max_parallel}};
}

std::vector<int> RunConfig::consolidated_epochs() const {
  std::vector<int> out;
  if (epochs_sweep > 0) {
    for (int e = 1; e <= epochs_sweep; ++e) out.push_back(e);
  } else {
    out.push_back(manifest.epochs);
  }
  return out;
}

}  // namespace consol
