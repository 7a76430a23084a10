#include "emreason/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

namespace em {
namespace fs = std::filesystem;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::kInvalidArgument, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

nlohmann::ordered_json completion_to_json(const Completion& c) {
  nlohmann::ordered_json j;
  j["text"] = c.text;
  j["usage"] = usage_to_json(c.usage);
  j["backend"] = c.backend;
  return j;
}

Completion completion_from_json(const nlohmann::json& j) {
  Completion c;
  c.text = j.at("text").get<std::string>();
  c.usage = usage_from_json(j.at("usage"));
  c.backend = j.value("backend", "");
  return c;
}

}  // namespace

nlohmann::ordered_json request_to_json(const CompletionRequest& request) {
  nlohmann::ordered_json j;
  j["model"] = request.model;
  auto messages = nlohmann::ordered_json::array();
  for (const auto& m : request.messages.messages()) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  j["messages"] = std::move(messages);
  j["temperature"] = request.temperature;
  j["max_output_tokens"] = request.max_output_tokens;
  return j;
}

std::string cache_key(const CompletionRequest& request) {
  return sha256_hex(request_to_json(request).dump());
}

nlohmann::ordered_json usage_to_json(const Usage& usage) {
  return {{"input_tokens", usage.input_tokens}, {"output_tokens", usage.output_tokens}};
}

Usage usage_from_json(const nlohmann::json& j) {
  return {j.at("input_tokens").get<std::uint64_t>(), j.at("output_tokens").get<std::uint64_t>()};
}

std::uint64_t count_whitespace_tokens(std::string_view text) {
  std::uint64_t count = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

Usage mock_usage(const CompletionRequest& request, std::string_view response_text) {
  Usage usage;
  for (const auto& m : request.messages.messages()) usage.input_tokens += count_whitespace_tokens(m.content);
  usage.output_tokens = count_whitespace_tokens(response_text);
  return usage;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::size_t retry) {
  const double base = static_cast<double>(policy.initial_delay.count());
  const double delay = base * std::pow(policy.multiplier, static_cast<double>(retry));
  const double cap = static_cast<double>(policy.max_delay.count());
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::min(delay, cap)));
}

bool is_retryable(Errc code) { return code == Errc::kRateLimited || code == Errc::kBackendUnavailable; }

// ---- TokenBucket -----------------------------------------------------------

TokenBucket::TokenBucket(RateLimit limit)
    : limit_(limit), tokens_(static_cast<double>(limit.requests)), last_(Clock::now()) {
  if (limit.requests == 0 || limit.interval.count() <= 0) {
    throw Error(Errc::kInvalidArgument, "rate limit needs at least one request per positive interval");
  }
}

void TokenBucket::acquire() {
  const double capacity = static_cast<double>(limit_.requests);
  const double per_ms = capacity / static_cast<double>(limit_.interval.count());
  while (true) {
    std::chrono::duration<double, std::milli> wait{};
    {
      std::lock_guard lock(mutex_);
      const auto now = Clock::now();
      const double elapsed = std::chrono::duration<double, std::milli>(now - last_).count();
      tokens_ = std::min(capacity, tokens_ + elapsed * per_ms);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double, std::milli>((1.0 - tokens_) / per_ms);
    }
    std::this_thread::sleep_for(wait);
  }
}

// ---- ResponseCache ---------------------------------------------------------

ResponseCache::ResponseCache(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::entry_path(const std::string& key) const {
  return *dir_ / "v1" / key.substr(0, 2) / (key + ".json");
}

std::optional<Completion> ResponseCache::get(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  Completion completion;
  try {
    const auto record = nlohmann::json::parse(in);
    if (record.at("key").get<std::string>() != key) return std::nullopt;
    completion = completion_from_json(record.at("completion"));
  } catch (const nlohmann::json::exception&) {
    // A torn or foreign file is treated as a miss and overwritten later.
    return std::nullopt;
  }
  std::lock_guard lock(mutex_);
  memory_.emplace(key, completion);
  return completion;
}

void ResponseCache::put(const std::string& key, const CompletionRequest& request, const Completion& completion) {
  Completion stored = completion;
  stored.cached = false;
  {
    std::lock_guard lock(mutex_);
    memory_.insert_or_assign(key, stored);
  }
  if (!dir_) return;

  nlohmann::ordered_json record;
  record["format"] = "emreason-cache/1";
  record["key"] = key;
  record["request"] = request_to_json(request);
  record["completion"] = completion_to_json(stored);

  const auto path = entry_path(key);
  fs::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id();
  const auto tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kMissingFile, "cannot write cache entry " + tmp);
    out << record.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

std::size_t ResponseCache::purge() {
  std::size_t removed = 0;
  {
    std::lock_guard lock(mutex_);
    removed = memory_.size();
    memory_.clear();
  }
  if (!dir_) return removed;
  removed = 0;
  const auto root = *dir_ / "v1";
  if (!fs::exists(root)) return 0;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") ++removed;
  }
  fs::remove_all(root);
  return removed;
}

// ---- Gateway ---------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      backend_name_(backend_->name()),
      options_(std::move(options)),
      cache_(options_.cache_enabled ? options_.cache_dir : std::nullopt) {
  if (options_.rate_limit) limiter_.emplace(*options_.rate_limit);
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Completion Gateway::call_backend(const CompletionRequest& request) {
  for (std::size_t attempt = 0;; ++attempt) {
    if (limiter_) limiter_->acquire();
    ++backend_calls_;
    try {
      Completion completion = backend_->complete(request);
      completion.backend = backend_name_;
      completion.cached = false;
      return completion;
    } catch (const Error& e) {
      if (!is_retryable(e.code()) || attempt >= options_.retry.max_retries) throw;
    }
    ++retries_;
    options_.sleep(backoff_delay(options_.retry, attempt));
  }
}

Completion Gateway::complete(const CompletionRequest& request) {
  ++requests_;
  const auto key = cache_key(request);
  if (options_.cache_enabled) {
    if (auto hit = cache_.get(key)) {
      ++cache_hits_;
      hit->cached = true;
      return *hit;
    }
  }

  std::promise<Completion> promise;
  {
    std::unique_lock lock(inflight_mutex_);
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      auto shared = it->second;
      lock.unlock();
      ++coalesced_;
      Completion completion = shared.get();
      completion.cached = true;
      return completion;
    }
    // The owner of a finished flight stores into the cache before leaving
    // the map, so a second look here closes the race with it.
    if (options_.cache_enabled) {
      if (auto hit = cache_.get(key)) {
        ++cache_hits_;
        hit->cached = true;
        return *hit;
      }
    }
    inflight_.emplace(key, promise.get_future().share());
  }

  const auto finish = [&] {
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(key);
  };
  try {
    Completion completion = call_backend(request);
    if (options_.cache_enabled) cache_.put(key, request, completion);
    promise.set_value(completion);
    finish();
    return completion;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

GatewayStats Gateway::stats() const {
  return {requests_.load(), backend_calls_.load(), cache_hits_.load(), coalesced_.load(), retries_.load()};
}

// ---- pool ------------------------------------------------------------------

std::vector<PoolResult> run_pool(Gateway& gateway, std::span<const CompletionRequest> requests,
                                 const PoolOptions& options, const std::function<void(const PoolResult&)>& on_result) {
  if (options.parallelism == 0) throw Error(Errc::kInvalidArgument, "parallelism must be at least 1");
  std::optional<TokenBucket> limiter;
  if (options.rate_limit) limiter.emplace(*options.rate_limit);

  std::vector<PoolResult> results;
  results.reserve(requests.size());
  std::mutex results_mutex;

  const auto run_one = [&](std::size_t i) {
    PoolResult result;
    result.index = i;
    result.request = requests[i];
    if (limiter) limiter->acquire();
    try {
      result.completion = gateway.complete(requests[i]);
    } catch (const Error& e) {
      result.error_code = e.code();
      result.error_message = e.what();
    } catch (const std::exception& e) {
      result.error_code = Errc::kBackendUnavailable;
      result.error_message = e.what();
    }
    std::lock_guard lock(results_mutex);
    results.push_back(std::move(result));
    if (on_result) on_result(results.back());
  };

  parallel_for(requests.size(), options.parallelism, run_one);
  return results;
}

}  // namespace em
