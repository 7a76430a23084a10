#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "emreason/prompts.hpp"
#include "emreason/strategies.hpp"

namespace em {

enum class Decision { kMatch, kNoMatch };
enum class ParseStatus { kForcedExact, kFreeInferred, kUnparseableDefaulted };

std::string_view to_string(Decision decision);
std::string_view to_string(ParseStatus status);
Decision parse_decision(std::string_view text);
ParseStatus parse_parse_status(std::string_view text);

struct ParseResult {
  Decision decision;
  ParseStatus status;

  friend bool operator==(const ParseResult&, const ParseResult&) = default;
};

struct MatchPrediction {
  std::string pair_id;
  Decision decision = Decision::kNoMatch;
  ParseStatus status = ParseStatus::kUnparseableDefaulted;
  std::string evidence;
};

/// Finds the last case-insensitive `match <sep> yes|no` (sep one of : = -,
/// optionally wrapped in markdown emphasis). A yes/no followed by '/' or '|'
/// is the template being quoted and does not count. Without a hit the text
/// goes to parse_free.
ParseResult parse_forced(std::string_view text, Decision fallback = Decision::kNoMatch);

/// Scores affirmative against negative cues in the final paragraph.
/// Affirmative cues inside a negated phrase ("do not refer to the same") are
/// ignored. A strict majority decides; a tie, including no cues at all,
/// yields `fallback` with kUnparseableDefaulted.
ParseResult parse_free(std::string_view text, Decision fallback = Decision::kNoMatch);

/// Parses the final turn of a transcript under the given response frame.
MatchPrediction decide(const Transcript& transcript, ResponseFrame frame, Decision fallback = Decision::kNoMatch);

nlohmann::ordered_json prediction_to_json(const MatchPrediction& prediction);

}  // namespace em
