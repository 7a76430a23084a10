#include <doctest.h>

#include "emreason/decoding.hpp"
#include "emreason/prompts.hpp"
#include "parser_corpus.hpp"

using namespace em;

namespace {

ParseResult parse(std::string_view text, ResponseFrame frame, Decision fallback = Decision::kNoMatch) {
  return frame == ResponseFrame::kForced ? parse_forced(text, fallback) : parse_free(text, fallback);
}

Transcript transcript_with(std::vector<std::pair<StepId, std::string>> turns) {
  Transcript t;
  t.pair_id = "p";
  for (auto& [step, text] : turns) {
    Turn turn{step, {}, {}};
    turn.completion.text = std::move(text);
    t.turns.push_back(std::move(turn));
  }
  return t;
}

}  // namespace

TEST_CASE("adversarial corpus yields the documented statuses") {
  const auto& corpus = emtest::parser_corpus();
  CHECK(corpus.size() == 50);
  for (const auto& c : corpus) {
    INFO("text: [", c.text, "] frame: ", to_string(c.frame));
    const auto r = parse(c.text, c.frame);
    CHECK(r.decision == c.decision);
    CHECK(r.status == c.status);
    CHECK(parse(c.text, c.frame) == r);
  }
}

TEST_CASE("the fallback only applies to unparseable text") {
  for (const auto& c : emtest::parser_corpus()) {
    INFO("text: [", c.text, "]");
    const auto r = parse(c.text, c.frame, Decision::kMatch);
    CHECK(r.status == c.status);
    CHECK(r.decision == (c.status == ParseStatus::kUnparseableDefaulted ? Decision::kMatch : c.decision));
  }
}

TEST_CASE("template answers parse to their intended decisions") {
  const auto& t = PromptTemplates::builtin();
  for (auto frame : {ResponseFrame::kForced, ResponseFrame::kFree}) {
    for (bool match : {true, false}) {
      const auto& answer = t.answer(frame, match);
      const auto r = parse(answer, frame);
      CHECK(r.decision == (match ? Decision::kMatch : Decision::kNoMatch));
      CHECK(r.status == (frame == ResponseFrame::kForced ? ParseStatus::kForcedExact : ParseStatus::kFreeInferred));
      // The answer still parses after reasoning text and a quoted template.
      const auto padded = std::string("Reasoning first. ") + t.response_instruction(frame) + "\n\n" + answer;
      CHECK(parse(padded, frame).decision == r.decision);
    }
  }
}

TEST_CASE("decide reads only the final turn") {
  auto multi = transcript_with({{StepId::kStep1Tokens, "Match: Yes"},
                                {StepId::kStep2Attributes, "Match: Yes"},
                                {StepId::kStep3Decision, "Match: No"}});
  auto p = decide(multi, ResponseFrame::kForced);
  CHECK(p.decision == Decision::kNoMatch);
  CHECK(p.status == ParseStatus::kForcedExact);
  CHECK(p.pair_id == "p");
  CHECK(p.evidence == "Match: No");

  auto debate = transcript_with({{StepId::kDebatePro, "They are the same entity."},
                                 {StepId::kDebateCon, "They are different."},
                                 {StepId::kDebateSynthesis, "Overall they refer to the same entity."}});
  CHECK(decide(debate, ResponseFrame::kFree).decision == Decision::kMatch);

  auto empty = transcript_with({});
  const auto total = decide(empty, ResponseFrame::kForced, Decision::kMatch);
  CHECK(total.decision == Decision::kMatch);
  CHECK(total.status == ParseStatus::kUnparseableDefaulted);
}

TEST_CASE("decision names") {
  CHECK(parse_decision("match") == Decision::kMatch);
  CHECK(parse_decision("no_match") == Decision::kNoMatch);
  CHECK(to_string(ParseStatus::kFreeInferred) == "free_inferred");
  CHECK(parse_parse_status("unparseable_defaulted") == ParseStatus::kUnparseableDefaulted);
  CHECK_THROWS_AS(parse_decision("maybe"), Error);
}
