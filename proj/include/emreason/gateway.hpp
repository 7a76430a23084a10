#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "emreason/error.hpp"
#include "emreason/pool.hpp"
#include "emreason/prompts.hpp"
#include "emreason/records.hpp"

namespace em {

struct Usage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  std::uint64_t total() const { return input_tokens + output_tokens; }
  Usage& operator+=(const Usage& other) {
    input_tokens += other.input_tokens;
    output_tokens += other.output_tokens;
    return *this;
  }
  friend Usage operator+(Usage a, const Usage& b) { return a += b; }
  friend bool operator==(const Usage&, const Usage&) = default;
};

/// The pair a request is about. Offline backends read it to simulate a
/// model; it is not part of the cache key.
struct RequestSubject {
  RecordPair pair;
  AttributeSchema schema;
  PromptVariant variant;
};

struct CompletionRequest {
  std::string model;
  MessageList messages;
  double temperature = 0.0;
  std::size_t max_output_tokens = 1024;
  StepId tag = StepId::kBaseline;
  std::shared_ptr<const RequestSubject> subject;
};

struct Completion {
  std::string text;
  Usage usage;
  std::string backend;
  bool cached = false;
};

/// SHA-256 (hex) over model, every message role and content, temperature
/// and max_output_tokens. The tag and subject do not contribute.
std::string cache_key(const CompletionRequest& request);

nlohmann::ordered_json request_to_json(const CompletionRequest& request);
nlohmann::ordered_json usage_to_json(const Usage& usage);
Usage usage_from_json(const nlohmann::json& j);

/// Number of maximal runs of non-whitespace bytes.
std::uint64_t count_whitespace_tokens(std::string_view text);
/// Offline token rule: whitespace tokens over every message content for
/// input, over the response text for output.
Usage mock_usage(const CompletionRequest& request, std::string_view response_text);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  /// Must be safe to call concurrently. Failures are reported as em::Error
  /// with kAuthError, kRateLimited, kBackendUnavailable or kResponseMalformed.
  virtual Completion complete(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
  std::size_t max_retries = 4;
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};
};

/// Delay before retry number `retry` (0-based): initial * multiplier^retry, capped.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::size_t retry);

bool is_retryable(Errc code);

/// `requests` per `interval`, with bursts of up to `requests`.
struct RateLimit {
  std::size_t requests = 60;
  std::chrono::milliseconds interval{60000};
};

class TokenBucket {
 public:
  explicit TokenBucket(RateLimit limit);
  /// Blocks until a token is available, then consumes it.
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  RateLimit limit_;
  std::mutex mutex_;
  double tokens_;
  Clock::time_point last_;
};

/// Content-addressed completion store. With a directory, each entry lives in
/// `<dir>/v1/<key[0:2]>/<key>.json`; without one it is memory-only.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<Completion> get(const std::string& key);
  void put(const std::string& key, const CompletionRequest& request, const Completion& completion);
  /// Removes every stored entry; returns how many were removed.
  std::size_t purge();

  const std::optional<std::filesystem::path>& directory() const { return dir_; }
  std::filesystem::path entry_path(const std::string& key) const;

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mutex_;
  std::unordered_map<std::string, Completion> memory_;
};

struct GatewayOptions {
  RetryPolicy retry;
  std::optional<RateLimit> rate_limit;
  bool cache_enabled = true;
  std::optional<std::filesystem::path> cache_dir;
  /// Replaces std::this_thread::sleep_for between retries (tests).
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
  std::size_t requests = 0;
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t coalesced = 0;
  std::size_t retries = 0;
};

/// Shared entry point for all completions: cache lookup, coalescing of
/// concurrent duplicates, rate limiting and retries around one backend.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

  Completion complete(const CompletionRequest& request);

  GatewayStats stats() const;
  const std::string& backend_name() const { return backend_name_; }
  ResponseCache& cache() { return cache_; }

 private:
  Completion call_backend(const CompletionRequest& request);

  std::shared_ptr<Backend> backend_;
  std::string backend_name_;
  GatewayOptions options_;
  ResponseCache cache_;
  std::optional<TokenBucket> limiter_;

  std::mutex inflight_mutex_;
  std::unordered_map<std::string, std::shared_future<Completion>> inflight_;

  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> coalesced_{0};
  std::atomic<std::size_t> retries_{0};
};

struct PoolOptions {
  std::size_t parallelism = 1;
  std::optional<RateLimit> rate_limit;
};

struct PoolResult {
  std::size_t index = 0;  // position in the input
  CompletionRequest request;
  std::optional<Completion> completion;
  std::optional<Errc> error_code;
  std::string error_message;

  bool ok() const { return completion.has_value(); }
};

/// Issues every request through the gateway with at most `parallelism` in
/// flight. Results arrive in completion order (input order when
/// parallelism is 1). A failing request yields an error record and never
/// stops the others. `on_result` is called under a lock as results arrive.
std::vector<PoolResult> run_pool(Gateway& gateway, std::span<const CompletionRequest> requests,
                                 const PoolOptions& options,
                                 const std::function<void(const PoolResult&)>& on_result = {});

}  // namespace em
