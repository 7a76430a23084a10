#include "emreason/decoding.hpp"

#include <array>
#include <utility>
#include <vector>

namespace em {
namespace {

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lowered(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') || u >= 0x80;
}

bool is_decoration(char c) { return c == ' ' || c == '\t' || c == '*' || c == '_' || c == '`' || c == '"' || c == '\''; }

// Decision encoded at position `pos` of lowercased `s`, if any.
std::optional<Decision> forced_answer_at(const std::string& s, std::size_t pos) {
  if (pos > 0 && is_word_byte(s[pos - 1])) return std::nullopt;
  std::size_t i = pos + 5;  // past "match"
  while (i < s.size() && is_decoration(s[i])) ++i;
  if (i >= s.size() || (s[i] != ':' && s[i] != '=' && s[i] != '-')) return std::nullopt;
  ++i;
  while (i < s.size() && is_decoration(s[i])) ++i;

  const auto word = [&](std::string_view w) -> bool {
    if (s.compare(i, w.size(), w) != 0) return false;
    const std::size_t end = i + w.size();
    if (end < s.size() && (is_word_byte(s[end]) || s[end] == '/' || s[end] == '|')) return false;
    return true;
  };
  if (word("yes")) return Decision::kMatch;
  if (word("no")) return Decision::kNoMatch;
  return std::nullopt;
}

std::string_view final_paragraph(std::string_view text) {
  // Split on blank lines; keep the last paragraph with any visible byte.
  std::string_view last;
  std::size_t start = 0;
  std::size_t i = 0;
  const auto flush = [&](std::size_t end) {
    auto para = text.substr(start, end - start);
    if (para.find_first_not_of(" \t\r\n") != std::string_view::npos) last = para;
  };
  while (i < text.size()) {
    const auto nl = text.find('\n', i);
    const auto line_end = nl == std::string_view::npos ? text.size() : nl;
    const auto line = text.substr(i, line_end - i);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      flush(i);
      start = line_end == text.size() ? line_end : line_end + 1;
    }
    i = line_end == text.size() ? line_end : line_end + 1;
  }
  flush(text.size());
  return last;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

void find_phrase(const std::string& s, std::string_view phrase, bool whole_word, std::vector<Span>& out) {
  for (auto pos = s.find(phrase); pos != std::string::npos; pos = s.find(phrase, pos + 1)) {
    const std::size_t end = pos + phrase.size();
    if (whole_word && ((pos > 0 && is_word_byte(s[pos - 1])) || (end < s.size() && is_word_byte(s[end])))) continue;
    out.push_back({pos, end});
  }
}

constexpr std::array<std::string_view, 7> kAffirmative = {
    "same entity", "same real-world entity", "refer to the same", "refers to the same",
    "represent the same", "represents the same", "is a match"};
constexpr std::array<std::string_view, 14> kNegative = {
    "different", "not the same", "not refer to the same", "n't refer to the same", "not represent the same",
    "n't represent the same", "not a match", "no match", "not match", "n't match", "not refer to one",
    "distinct entities", "separate entities", "mismatch"};

}  // namespace

std::string_view to_string(Decision decision) { return decision == Decision::kMatch ? "match" : "no_match"; }

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::kForcedExact: return "forced_exact";
    case ParseStatus::kFreeInferred: return "free_inferred";
    case ParseStatus::kUnparseableDefaulted: return "unparseable_defaulted";
  }
  return "unparseable_defaulted";
}

Decision parse_decision(std::string_view text) {
  if (text == "match" || text == "yes") return Decision::kMatch;
  if (text == "no_match" || text == "no") return Decision::kNoMatch;
  throw Error(Errc::kInvalidArgument, "unknown decision '" + std::string(text) + "'");
}

ParseStatus parse_parse_status(std::string_view text) {
  for (auto s : {ParseStatus::kForcedExact, ParseStatus::kFreeInferred, ParseStatus::kUnparseableDefaulted}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::kInvalidArgument, "unknown parse status '" + std::string(text) + "'");
}

ParseResult parse_forced(std::string_view text, Decision fallback) {
  const auto s = lowered(text);
  std::optional<Decision> last;
  for (auto pos = s.find("match"); pos != std::string::npos; pos = s.find("match", pos + 1)) {
    if (auto d = forced_answer_at(s, pos)) last = d;
  }
  if (last) return {*last, ParseStatus::kForcedExact};
  return parse_free(text, fallback);
}

ParseResult parse_free(std::string_view text, Decision fallback) {
  const auto s = lowered(final_paragraph(text));

  std::vector<Span> negative;
  for (auto phrase : kNegative) find_phrase(s, phrase, false, negative);
  find_phrase(s, "no", true, negative);

  std::vector<Span> affirmative;
  for (auto phrase : kAffirmative) find_phrase(s, phrase, false, affirmative);
  find_phrase(s, "yes", true, affirmative);

  std::size_t yes = 0;
  for (const auto& a : affirmative) {
    bool negated = false;
    for (const auto& n : negative) negated = negated || (a.begin < n.end && n.begin < a.end);
    if (!negated) ++yes;
  }
  const std::size_t no = negative.size();
  if (yes > no) return {Decision::kMatch, ParseStatus::kFreeInferred};
  if (no > yes) return {Decision::kNoMatch, ParseStatus::kFreeInferred};
  return {fallback, ParseStatus::kUnparseableDefaulted};
}

MatchPrediction decide(const Transcript& transcript, ResponseFrame frame, Decision fallback) {
  MatchPrediction prediction;
  prediction.pair_id = transcript.pair_id;
  if (transcript.turns.empty()) {
    prediction.decision = fallback;
    prediction.status = ParseStatus::kUnparseableDefaulted;
    return prediction;
  }
  prediction.evidence = transcript.turns.back().completion.text;
  const auto result = frame == ResponseFrame::kForced ? parse_forced(prediction.evidence, fallback)
                                                      : parse_free(prediction.evidence, fallback);
  prediction.decision = result.decision;
  prediction.status = result.status;
  return prediction;
}

nlohmann::ordered_json prediction_to_json(const MatchPrediction& prediction) {
  return {{"pair_id", prediction.pair_id},
          {"decision", to_string(prediction.decision)},
          {"parse_status", to_string(prediction.status)},
          {"evidence", prediction.evidence}};
}

}  // namespace em
