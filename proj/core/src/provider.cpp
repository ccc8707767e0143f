#include "consol/provider.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "consol/digest.hpp"
#include "consol/error.hpp"

namespace consol {

namespace fs = std::filesystem;

json request_key(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& t : request.messages) messages.push_back(to_json(t));
  return json{{"model", request.model_tag},
              {"temperature", request.temperature},
              {"max_new_tokens", request.max_new_tokens},
              {"messages", messages}};
}

std::string request_digest(const ChatRequest& request) {
  return sha256_hex(request_key(request).dump());
}

// --- HttpProvider -----------------------------------------------------------

HttpProvider::HttpProvider(ProviderConfig config, std::shared_ptr<Transport> transport,
                           Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      slots_(config_.max_concurrent) {
  if (config_.max_concurrent < 1) {
    throw Error(ErrorKind::kConfig, "provider max_concurrent must be positive");
  }
  if (config_.max_retries < 0) {
    throw Error(ErrorKind::kConfig, "provider max_retries must be >= 0");
  }
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpProvider::encode_body(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& t : request.messages) messages.push_back(to_json(t));
  return json{{"model", request.model_tag},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_new_tokens},
              {"n", 1},
              {"stream", false}}
      .dump();
}

ChatResponse HttpProvider::decode_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProviderError(200, excerpt(body), "provider reply is not a JSON object");
  }
  ChatResponse r;
  try {
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (content.is_string()) r.content = content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      r.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
  } catch (const json::exception& e) {
    throw ProviderError(200, excerpt(body), fmt::format("malformed provider reply: {}", e.what()));
  }
  if (r.content.empty()) {
    throw ProviderError(200, excerpt(body), "provider reply has empty content");
  }
  return r;
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
  std::vector<std::pair<std::string, std::string>> headers = {
      {"Content-Type", "application/json"}};
  if (!config_.auth_token_env_var.empty()) {
    const char* token = std::getenv(config_.auth_token_env_var.c_str());
    if (token != nullptr && *token != '\0') {
      headers.emplace_back("Authorization", fmt::format("Bearer {}", token));
    }
  }
  const std::string body = encode_body(request);

  int last_status = 0;
  std::string last_body;
  std::string last_reason;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = config_.backoff_base * (1LL << std::min(attempt - 1, 20));
      spdlog::debug("provider: retry {} for '{}' after {} ms", attempt, request.label,
                    delay.count());
      sleeper_(delay);
    }
    HttpReply reply;
    try {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      reply = transport_->post(config_.endpoint_url, body, headers, config_.timeout);
    } catch (const TransportError& e) {
      last_status = 0;
      last_body.clear();
      last_reason = e.what();
      spdlog::warn("provider: transport failure for '{}': {}", request.label, e.what());
      continue;
    }
    if (reply.status >= 200 && reply.status < 300) {
      return decode_body(reply.body);
    }
    last_status = reply.status;
    last_body = reply.body;
    last_reason = fmt::format("HTTP {}", reply.status);
    const bool retriable = reply.status == 429 || reply.status >= 500;
    if (!retriable) break;
    spdlog::warn("provider: HTTP {} for '{}'", reply.status, request.label);
  }
  throw ProviderError(last_status, excerpt(last_body),
                      fmt::format("provider request '{}' failed after {} attempt(s): {}{}",
                                  request.label, config_.max_retries + 1, last_reason,
                                  last_body.empty() ? "" : ": " + excerpt(last_body)));
}

// --- Cache / fixtures -------------------------------------------------------

json fixture_record(const ChatRequest& request, const std::string& digest,
                    const ChatResponse& response) {
  return json{{"schema", "chat_response"},
              {"version", kSchemaVersion},
              {"digest", digest},
              {"label", request.label},
              {"request", request_key(request)},
              {"response",
               {{"content", response.content},
                {"prompt_tokens", response.prompt_tokens},
                {"completion_tokens", response.completion_tokens}}}};
}

ChatResponse response_from_fixture(const json& record, std::string_view where) {
  if (!record.is_object() || record.value("schema", "") != "chat_response") {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'schema': expected 'chat_response'", where));
  }
  if (!record.contains("response") || !record["response"].is_object()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'response': expected object", where));
  }
  const json& r = record["response"];
  ChatResponse out;
  out.content = require_string(r, "content", where);
  if (out.content.empty()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'response.content': empty", where));
  }
  out.prompt_tokens = r.value("prompt_tokens", 0);
  out.completion_tokens = r.value("completion_tokens", 0);
  return out;
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

std::optional<ChatResponse> ResponseCache::get(const std::string& digest) {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
  fs::path file = dir_ / (digest + ".json");
  if (dir_.empty() || !fs::exists(file)) return std::nullopt;
  ChatResponse r = response_from_fixture(read_json_file(file), file.string());
  memory_.emplace(digest, r);
  return r;
}

void ResponseCache::put(const ChatRequest& request, const std::string& digest,
                        const ChatResponse& response) {
  std::lock_guard lock(mu_);
  ChatResponse stored = response;
  stored.cached = false;
  memory_[digest] = stored;
  if (!dir_.empty()) {
    write_json_file(dir_ / (digest + ".json"), fixture_record(request, digest, stored));
  }
}

CachedProvider::CachedProvider(std::shared_ptr<Provider> inner,
                               std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

ChatResponse CachedProvider::complete(const ChatRequest& request) {
  const std::string digest = request_digest(request);
  if (auto hit = cache_->get(digest)) {
    hit->cached = true;
    return *hit;
  }
  ChatResponse r = inner_->complete(request);
  cache_->put(request, digest, r);
  r.cached = false;
  return r;
}

ReplayProvider::ReplayProvider(const fs::path& fixture_dir) {
  if (!fs::is_directory(fixture_dir)) {
    throw Error(ErrorKind::kIo,
                fmt::format("fixture directory {} does not exist", fixture_dir.string()));
  }
  for (const auto& entry : fs::directory_iterator(fixture_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string where = entry.path().string();
    json record = read_json_file(entry.path());
    ChatResponse r = response_from_fixture(record, where);
    std::string digest = entry.path().stem().string();
    if (record.contains("digest") && record["digest"] != digest) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'digest': does not match file name", where));
    }
    r.cached = true;
    fixtures_.emplace(std::move(digest), std::move(r));
  }
}

ChatResponse ReplayProvider::complete(const ChatRequest& request) {
  const std::string digest = request_digest(request);
  auto it = fixtures_.find(digest);
  if (it == fixtures_.end()) {
    throw Error(ErrorKind::kMissingFixture,
                fmt::format("missing fixture {} for request '{}'", digest, request.label));
  }
  return it->second;
}

std::shared_ptr<Provider> make_replay_provider(const fs::path& fixture_dir) {
  return std::make_shared<ReplayProvider>(fixture_dir);
}

std::shared_ptr<Provider> make_live_provider(const ProviderConfig& config) {
  auto http = std::make_shared<HttpProvider>(config, make_http_transport());
  return std::make_shared<CachedProvider>(http, std::make_shared<ResponseCache>(config.cache_dir));
}

}  // namespace consol
