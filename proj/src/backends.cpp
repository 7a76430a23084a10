#include "emreason/backends.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "emreason/lexical.hpp"

namespace em {
namespace {

std::string fixed2(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", value);
  return buffer;
}

std::string list_bag(const TokenBag& bag) {
  if (bag.empty()) return "(none)";
  std::string out;
  for (const auto& [token, count] : bag) {
    if (!out.empty()) out += ", ";
    out += token;
    if (count > 1) out += " (x" + std::to_string(count) + ")";
  }
  return out;
}

std::string step1_text(const RequestSubject& s) {
  const auto diff = token_diff(value_tokens(s.pair.left, s.schema), value_tokens(s.pair.right, s.schema));
  return "Matched tokens: " + list_bag(diff.matched) + "\nUnmatched tokens in Object 1: " +
         list_bag(diff.only_left) + "\nUnmatched tokens in Object 2: " + list_bag(diff.only_right);
}

std::string step2_text(const RequestSubject& s) {
  const auto overlap = attribute_overlap(s.pair.left, s.pair.right, s.schema);
  if (overlap.empty()) return "Most influential attribute: (none)";
  auto best = overlap.begin();
  for (auto it = overlap.begin(); it != overlap.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  std::string out = "Most influential attribute: " + best->first + "\nAttribute overlap: ";
  for (std::size_t i = 0; i < overlap.size(); ++i) {
    if (i > 0) out += ", ";
    out += overlap[i].first + "=" + fixed2(overlap[i].second);
  }
  return out;
}

}  // namespace

std::string HeuristicBackend::respond(StepId step, const RequestSubject& s) const {
  const double jaccard = token_jaccard(s.pair.left, s.pair.right);
  const bool match = jaccard >= threshold_;
  const auto decision = [&] {
    const std::string evidence = "Token overlap (Jaccard) is " + fixed2(jaccard);
    if (s.variant.response_frame == ResponseFrame::kForced) {
      return evidence + (match ? ", at or above " : ", below ") + "the " + fixed2(threshold_) +
             " threshold.\nMatch: " + (match ? "Yes" : "No");
    }
    return evidence + ".\n\n" +
           (match ? "These two objects refer to the same real-world entity."
                  : "These two objects are different entities.");
  };

  switch (step) {
    case StepId::kStep1Tokens:
      return step1_text(s);
    case StepId::kStep2Attributes:
      return step2_text(s);
    case StepId::kCotSingle:
      return "Step 1: " + step1_text(s) + "\n\nStep 2: " + step2_text(s) + "\n\nStep 3: " + decision();
    case StepId::kDebatePro: {
      const auto diff = token_diff(value_tokens(s.pair.left, s.schema), value_tokens(s.pair.right, s.schema));
      return "Arguments for a match: the objects share " + std::to_string(diff.matched.size()) +
             " distinct tokens: " + list_bag(diff.matched) + ".";
    }
    case StepId::kDebateCon: {
      const auto diff = token_diff(value_tokens(s.pair.left, s.schema), value_tokens(s.pair.right, s.schema));
      return "Arguments against a match: tokens only in Object 1: " + list_bag(diff.only_left) +
             "; tokens only in Object 2: " + list_bag(diff.only_right) + ".";
    }
    case StepId::kBaseline:
    case StepId::kStep3Decision:
    case StepId::kDebateSynthesis:
      return decision();
  }
  return decision();
}

Completion HeuristicBackend::complete(const CompletionRequest& request) {
  if (!request.subject) {
    throw Error(Errc::kResponseMalformed,
                "heuristic backend cannot answer request " + cache_key(request) + " without a subject pair");
  }
  Completion completion;
  completion.text = respond(request.tag, *request.subject);
  completion.usage = mock_usage(request, completion.text);
  completion.backend = name();
  return completion;
}

// ---- fixture ---------------------------------------------------------------

FixtureBackend FixtureBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kMissingFile, "cannot open fixture file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
}

FixtureBackend FixtureBackend::from_json(const nlohmann::json& document) {
  static constexpr Errc kNamed[] = {Errc::kAuthError, Errc::kRateLimited, Errc::kBackendUnavailable,
                                    Errc::kResponseMalformed};
  std::map<std::string, Entry> responses;
  for (const auto& [key, value] : document.at("responses").items()) {
    Entry entry;
    if (value.is_string()) {
      entry.text = value.get<std::string>();
    } else if (value.contains("error")) {
      const auto name = value.at("error").get<std::string>();
      for (auto code : kNamed) {
        if (errc_name(code) == name) entry.error = code;
      }
      if (!entry.error) throw Error(Errc::kConfigError, "fixture entry " + key + ": unknown error '" + name + "'");
    } else {
      entry.text = value.at("text").get<std::string>();
      if (value.contains("usage")) entry.usage = usage_from_json(value.at("usage"));
    }
    responses.emplace(key, std::move(entry));
  }
  return FixtureBackend(std::move(responses));
}

nlohmann::ordered_json fixture_document(const std::map<std::string, FixtureBackend::Entry>& responses) {
  nlohmann::ordered_json doc;
  doc["format"] = "emreason-fixture/1";
  nlohmann::ordered_json entries = nlohmann::ordered_json::object();
  for (const auto& [key, entry] : responses) {
    if (entry.error) {
      entries[key] = {{"error", errc_name(*entry.error)}};
    } else if (entry.usage) {
      entries[key] = {{"text", entry.text}, {"usage", usage_to_json(*entry.usage)}};
    } else {
      entries[key] = entry.text;
    }
  }
  doc["responses"] = std::move(entries);
  return doc;
}

Completion FixtureBackend::complete(const CompletionRequest& request) {
  const auto key = cache_key(request);
  auto it = responses_.find(key);
  if (it == responses_.end()) {
    throw Error(Errc::kResponseMalformed, "no fixture response for request " + key + " (" +
                                              std::string(to_string(request.tag)) + ")");
  }
  const auto& entry = it->second;
  if (entry.error) throw Error(*entry.error, "fixture-scripted failure for request " + key);
  Completion completion;
  completion.text = entry.text;
  completion.usage = entry.usage.value_or(mock_usage(request, entry.text));
  completion.backend = name();
  return completion;
}

}  // namespace em
