#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "emreason/gateway.hpp"

namespace em {

/// Deterministic stand-in for a model. It reads the request subject and
/// answers per step:
///   step1_tokens      matched / unmatched token lists
///   step2_attributes  the attribute with the highest per-attribute overlap
///   decision steps    "Match: Yes" iff token-set Jaccard >= threshold
///   debate pro / con  templated argument text
/// Usage follows the whitespace-token rule of `mock_usage`.
class HeuristicBackend : public Backend {
 public:
  explicit HeuristicBackend(double threshold = 0.5) : threshold_(threshold) {}

  std::string name() const override { return "heuristic"; }
  Completion complete(const CompletionRequest& request) override;

  /// The text `complete` would return, without usage accounting.
  std::string respond(StepId step, const RequestSubject& subject) const;

 private:
  double threshold_;
};

/// Canned responses keyed by `cache_key`. File format:
///   {"format": "emreason-fixture/1",
///    "responses": {"<key>": "text" | {"text": "...", "usage": {...}} | {"error": "<Errc name>"}}}
/// Entries without usage fall back to the whitespace-token rule.
class FixtureBackend : public Backend {
 public:
  struct Entry {
    std::string text;
    std::optional<Usage> usage;
    std::optional<Errc> error;
  };

  explicit FixtureBackend(std::map<std::string, Entry> responses) : responses_(std::move(responses)) {}
  static FixtureBackend from_file(const std::filesystem::path& path);
  static FixtureBackend from_json(const nlohmann::json& document);

  std::string name() const override { return "fixture"; }
  Completion complete(const CompletionRequest& request) override;

  std::size_t size() const { return responses_.size(); }

 private:
  std::map<std::string, Entry> responses_;
};

nlohmann::ordered_json fixture_document(const std::map<std::string, FixtureBackend::Entry>& responses);

struct NetworkConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key;
  std::chrono::seconds timeout{120};
  // Some models accept only their default sampling temperature.
  bool send_temperature = true;
};

/// JSON chat-completion client. HTTP 401/403 map to kAuthError, 429 to
/// kRateLimited, 408 / 5xx / transport failures to kBackendUnavailable, and
/// any other unusable reply to kResponseMalformed.
class NetworkBackend : public Backend {
 public:
  explicit NetworkBackend(NetworkConfig config);

  std::string name() const override { return "network"; }
  Completion complete(const CompletionRequest& request) override;

  /// Request body sent for `request`.
  static nlohmann::ordered_json wire_request(const CompletionRequest& request, bool send_temperature = true);
  /// Extracts text and usage from a response body.
  static Completion parse_wire_response(std::string_view body);

 private:
  NetworkConfig config_;
};

}  // namespace em
