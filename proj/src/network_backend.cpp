#include <httplib.h>

#include "emreason/backends.hpp"

namespace em {

NetworkBackend::NetworkBackend(NetworkConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) throw Error(Errc::kAuthError, "network backend needs an API key");
}

nlohmann::ordered_json NetworkBackend::wire_request(const CompletionRequest& request, bool send_temperature) {
  nlohmann::ordered_json body;
  body["model"] = request.model;
  auto messages = nlohmann::ordered_json::array();
  for (const auto& m : request.messages.messages()) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["messages"] = std::move(messages);
  if (send_temperature) body["temperature"] = request.temperature;
  body["max_completion_tokens"] = request.max_output_tokens;
  return body;
}

Completion NetworkBackend::parse_wire_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kResponseMalformed, std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty()) throw Error(Errc::kResponseMalformed, "response has no choices");
    const auto& content = choices.at(0).at("message").at("content");
    if (!content.is_string()) throw Error(Errc::kResponseMalformed, "choice content is not a string");
    const auto& usage = j.at("usage");
    Completion completion;
    completion.text = content.get<std::string>();
    completion.usage.input_tokens = usage.at("prompt_tokens").get<std::uint64_t>();
    completion.usage.output_tokens = usage.at("completion_tokens").get<std::uint64_t>();
    return completion;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kResponseMalformed, std::string("unexpected response shape: ") + e.what());
  }
}

Completion NetworkBackend::complete(const CompletionRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  client.set_bearer_token_auth(config_.api_key);

  const auto body = wire_request(request, config_.send_temperature).dump();
  auto result = client.Post(config_.path, body, "application/json");
  if (!result) {
    throw Error(Errc::kBackendUnavailable, "request to " + config_.base_url + " failed: " +
                                               httplib::to_string(result.error()));
  }
  const int status = result->status;
  const auto detail = "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 300);
  if (status == 401 || status == 403) throw Error(Errc::kAuthError, detail);
  if (status == 429) throw Error(Errc::kRateLimited, detail);
  if (status == 408 || status >= 500) throw Error(Errc::kBackendUnavailable, detail);
  if (status != 200) throw Error(Errc::kResponseMalformed, detail);

  Completion completion = parse_wire_response(result->body);
  completion.backend = name();
  return completion;
}

}  // namespace em
