#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "consol/corpus.hpp"

namespace consol {

struct ChatRequest {
  std::string model_tag;
  std::vector<Turn> messages;
  double temperature = 0.0;
  int max_new_tokens = 512;
  /// Human-readable purpose tag ("reflect/cli-tool/pass1"). Used for logs and
  /// fixture files; not part of the digest and never sent on the wire.
  std::string label;
};

/// The fields that identify a request: model tag, temperature, token limit
/// and the full message list.
json request_key(const ChatRequest& request);

/// SHA-256 of the canonical serialization of request_key().
std::string request_digest(const ChatRequest& request);

struct ChatResponse {
  std::string content;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  bool cached = false;
};

/// A chat-completion endpoint. Implementations are safe to call from many
/// threads at once.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct ProviderConfig {
  std::string endpoint_url;
  std::string auth_token_env_var;
  int max_concurrent = 4;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds timeout{120000};
  std::filesystem::path cache_dir;
};

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Raised by transports when no HTTP reply was obtained (timeout, refused).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& url, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers,
                         std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport (http:// and https://).
std::shared_ptr<Transport> make_http_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Speaks the chat-completions wire format: POST {model, messages,
/// temperature, max_tokens}; reads choices[0].message.content and usage.
/// Timeouts, HTTP 429 and 5xx are retried with exponential backoff
/// (backoff_base * 2^attempt) up to max_retries times; other non-2xx replies
/// fail immediately. At most max_concurrent posts are in flight.
class HttpProvider final : public Provider {
 public:
  HttpProvider(ProviderConfig config, std::shared_ptr<Transport> transport,
               Sleeper sleeper = nullptr);

  ChatResponse complete(const ChatRequest& request) override;

  static std::string encode_body(const ChatRequest& request);
  static ChatResponse decode_body(const std::string& body);

 private:
  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::counting_semaphore<> slots_;
};

/// One `<digest>.json` file per request. Replay fixtures use the same layout.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<ChatResponse> get(const std::string& digest);
  void put(const ChatRequest& request, const std::string& digest, const ChatResponse& response);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, ChatResponse> memory_;
};

json fixture_record(const ChatRequest& request, const std::string& digest,
                    const ChatResponse& response);
/// Parses a fixture/cache file; empty content is a schema error.
ChatResponse response_from_fixture(const json& record, std::string_view where);

/// Serves from the cache when possible, otherwise forwards to `inner` and
/// stores the answer. Cache hits come back with cached = true.
class CachedProvider final : public Provider {
 public:
  CachedProvider(std::shared_ptr<Provider> inner, std::shared_ptr<ResponseCache> cache);

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<Provider> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

/// Answers only from a fixture directory loaded eagerly at construction.
/// Unknown requests raise a missing-fixture error naming the digest.
class ReplayProvider final : public Provider {
 public:
  explicit ReplayProvider(const std::filesystem::path& fixture_dir);

  ChatResponse complete(const ChatRequest& request) override;

  std::size_t size() const { return fixtures_.size(); }

 private:
  std::map<std::string, ChatResponse> fixtures_;
};

std::shared_ptr<Provider> make_replay_provider(const std::filesystem::path& fixture_dir);

/// Live provider: HTTP client behind an on-disk cache (when cache_dir is set).
std::shared_ptr<Provider> make_live_provider(const ProviderConfig& config);

}  // namespace consol
