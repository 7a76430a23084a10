#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>
#include <set>

#include "emreason/datasets.hpp"
#include "emreason/error.hpp"
#include "emreason/lexical.hpp"
#include "emreason/prompts.hpp"
#include "test_support.hpp"

using namespace em;

namespace {

struct Fixture {
  DatasetBundle bundle = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher);
  PromptContext ctx;
  Fixture() {
    ctx.schema = bundle.schema;
    ctx.domain = bundle.domain;
  }
  const RecordPair& pair(std::size_t i = 0) const { return bundle.split(Split::kTest).at(i); }
  std::vector<FewShotExample> shots(std::size_t k) const { return sample_few_shot(bundle, k, 42); }
};

bool contains(const std::string& haystack, std::string_view needle) {
  return haystack.find(needle) != std::string::npos;
}

std::size_t occurrences(const std::string& haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto at = haystack.find(needle); at != std::string::npos; at = haystack.find(needle, at + 1)) ++n;
  return n;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::kInvalidArgument;
}

PromptVariant variant(std::size_t shots = 0, bool hints = false, ResponseFrame rf = ResponseFrame::kForced) {
  return PromptVariant{TaskFrame::kGeneral, Verbiage::kSimple, rf, shots, hints};
}

}  // namespace

TEST_CASE("variant names and enumeration") {
  CHECK(variant().name() == "general-simple-forced-0shot-nohints");
  const std::size_t zero[] = {0};
  const std::size_t zero_two[] = {0, 2};
  CHECK(enumerate_variants(zero).size() == 16);
  const auto all = enumerate_variants(zero_two);
  CHECK(all.size() == 32);
  CHECK(std::set<PromptVariant>(all.begin(), all.end()).size() == 32);
  CHECK(enumerate_variants(zero_two) == all);
  CHECK(code_of([] { enumerate_variants({}); }) == Errc::kInvalidArgument);
  for (const auto& v : all) CHECK(variant_from_json(to_json(v)) == v);
}

TEST_CASE("message lists enforce role order") {
  CHECK_NOTHROW(MessageList({{Role::kSystem, "s"}, {Role::kUser, "u"}, {Role::kAssistant, "a"}, {Role::kUser, "u"}}));
  CHECK_THROWS_AS(MessageList(std::vector<Message>{}), Error);
  CHECK_THROWS_AS(MessageList({{Role::kAssistant, "a"}}), Error);
  CHECK_THROWS_AS(MessageList({{Role::kUser, "u"}, {Role::kUser, "u"}}), Error);
}

TEST_CASE("baseline prompt layout") {
  Fixture f;
  const auto m = render_baseline(f.ctx, f.pair(), variant(), {});
  REQUIRE(m.size() == 1);
  const auto& text = m.back().content;
  CHECK(m.back().role == Role::kUser);
  CHECK(text.rfind("Determine if these two objects match", 0) == 0);
  CHECK(contains(text, serialize_record(f.pair().left, f.ctx.schema)));
  CHECK(contains(text, serialize_record(f.pair().right, f.ctx.schema)));
  CHECK(contains(text, "Match: Yes/No"));
  CHECK(text.substr(text.rfind("\n\n") + 2).find("Match: Yes/No") != std::string::npos);
  CHECK_FALSE(contains(text, "Example"));
  CHECK_FALSE(contains(text, "Hints"));
  CHECK(render_baseline(f.ctx, f.pair(), variant(), {}) == m);
}

TEST_CASE("domain-specific frame uses the dataset domain") {
  Fixture f;
  f.ctx.domain = "product";
  auto v = variant();
  v.task_frame = TaskFrame::kDomainSpecific;
  const auto text = render_baseline(f.ctx, f.pair(), v, {}).back().content;
  CHECK(contains(text, "product listings"));
  CHECK_FALSE(contains(text, "{{"));
}

TEST_CASE("shots carry answers in the response frame format") {
  Fixture f;
  const auto shots = f.shots(2);
  const auto forced = render_baseline(f.ctx, f.pair(), variant(2), shots).back().content;
  CHECK(occurrences(forced, "Answer: Match: Yes") == 1);
  CHECK(occurrences(forced, "Answer: Match: No") == 1);
  CHECK(contains(forced, serialize_record(shots[0].pair.left, f.ctx.schema)));
  const auto free = render_baseline(f.ctx, f.pair(), variant(2, false, ResponseFrame::kFree), shots).back().content;
  CHECK(contains(free, "Answer: Yes, these two objects refer to the same real-world entity."));
  CHECK_FALSE(contains(free, "Match: Yes/No"));
  CHECK(code_of([&] { render_baseline(f.ctx, f.pair(), variant(1), shots); }) == Errc::kShotCountMismatch);
}

TEST_CASE("property: hints appear iff enabled and every hinted token is in both records") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    PromptContext ctx;
    ctx.schema = emtest::random_schema(rng);
    const auto pair = emtest::random_pair(rng, ctx.schema, static_cast<std::size_t>(i));
    CHECK_FALSE(contains(render_baseline(ctx, pair, variant(), {}).back().content, "Hints"));
    const auto text = render_baseline(ctx, pair, variant(0, true), {}).back().content;
    CHECK(contains(text, "Hints"));
    const auto hints = compute_hints(pair, ctx.schema);
    const auto left = to_bag(tokenize(serialize_record(pair.left, ctx.schema)));
    const auto right = to_bag(tokenize(serialize_record(pair.right, ctx.schema)));
    for (const auto& t : hints.tokens) {
      CHECK(left.contains(t));
      CHECK(right.contains(t));
    }
    CHECK(std::set<std::string>(hints.tokens.begin(), hints.tokens.end()).size() == hints.tokens.size());
  }
}

TEST_CASE("single-prompt chain of thought lists the three steps in order") {
  Fixture f;
  const auto text = render_single_prompt_cot(f.ctx, f.pair(), variant(), {}).back().content;
  const auto s1 = text.find("1. Identify matched and unmatched tokens");
  const auto s2 = text.find("2. Identify which attributes are most influential");
  const auto s3 = text.find("3. ");
  REQUIRE(s1 != std::string::npos);
  REQUIRE(s2 != std::string::npos);
  CHECK(s1 < s2);
  CHECK(s2 < s3);
  CHECK(contains(text, "Match: Yes/No"));
  CHECK(render_single_prompt_cot(f.ctx, f.pair(), variant(), {}).back().content == text);
}

TEST_CASE("chained steps embed earlier responses verbatim") {
  Fixture f;
  const auto shots = f.shots(2);
  const auto v = variant(2);
  const auto s1 = render_step(f.ctx, StepId::kStep1Tokens, f.pair(), {}, v, shots).back().content;
  CHECK(contains(s1, "matched and unmatched tokens"));
  CHECK(contains(s1, serialize_record(f.pair().left, f.ctx.schema)));
  CHECK(contains(s1, serialize_record(f.pair().right, f.ctx.schema)));
  CHECK_FALSE(contains(s1, "Example"));
  CHECK_FALSE(contains(s1, "Match: Yes/No"));

  const std::vector<PriorResponse> one = {{StepId::kStep1Tokens, "R1 {{left}} text"}};
  const auto s2 = render_step(f.ctx, StepId::kStep2Attributes, f.pair(), one, v, shots).back().content;
  CHECK(contains(s2, "attributes are most influential"));
  CHECK(contains(s2, "R1 {{left}} text"));

  const std::vector<PriorResponse> two = {{StepId::kStep1Tokens, "R1"}, {StepId::kStep2Attributes, "R2\nmore"}};
  const auto s3 = render_step(f.ctx, StepId::kStep3Decision, f.pair(), two, v, shots).back().content;
  CHECK(contains(s3, "refer to the same real-world entity"));
  CHECK(contains(s3, "R1"));
  CHECK(contains(s3, "R2\nmore"));
  CHECK(occurrences(s3, "Example ") == 2);
  CHECK(s3.substr(s3.rfind("\n\n")).find("Match: Yes/No") != std::string::npos);

  CHECK(code_of([&] { render_step(f.ctx, StepId::kStep3Decision, f.pair(), {}, v, shots); }) ==
        Errc::kMissingPrior);
  const std::vector<PriorResponse> swapped = {two[1], two[0]};
  CHECK(code_of([&] { render_step(f.ctx, StepId::kStep3Decision, f.pair(), swapped, v, shots); }) ==
        Errc::kWrongPriorOrder);
}

TEST_CASE("debate phases") {
  Fixture f;
  const auto v = variant();
  const auto pro = render_debate(f.ctx, StepId::kDebatePro, f.pair(), std::nullopt, std::nullopt, v).back().content;
  const auto con = render_debate(f.ctx, StepId::kDebateCon, f.pair(), std::nullopt, std::nullopt, v).back().content;
  CHECK(contains(pro, "should refer to the same"));
  CHECK_FALSE(contains(pro, "should not"));
  CHECK_FALSE(contains(pro, "against"));
  CHECK(contains(con, "should not match"));
  CHECK_FALSE(contains(pro, "Match: Yes/No"));
  const auto syn =
      render_debate(f.ctx, StepId::kDebateSynthesis, f.pair(), "PRO TEXT", "CON TEXT", v).back().content;
  CHECK(contains(syn, "PRO TEXT"));
  CHECK(contains(syn, "CON TEXT"));
  CHECK((contains(syn, "synthesize both viewpoints") || contains(syn, "Synthesize both viewpoints")));
  CHECK(contains(syn, "Match: Yes/No"));
  CHECK(code_of([&] {
          render_debate(f.ctx, StepId::kDebateSynthesis, f.pair(), std::nullopt, "c", v);
        }) == Errc::kMissingArguments);
}

TEST_CASE("template files are validated") {
  auto doc = nlohmann::json::parse(std::ifstream(std::filesystem::path(EM_TEMPLATES_FILE)));
  CHECK(PromptTemplates::from_json(doc).version() == PromptTemplates::builtin().version());
  auto bad = doc;
  bad["steps"]["baseline"]["general"]["simple"] = "Decide {{nonsense}}.";
  CHECK(code_of([&] { PromptTemplates::from_json(bad); }) == Errc::kTemplateError);
  auto missing = doc;
  missing["steps"].erase("step2_attributes");
  CHECK(code_of([&] { PromptTemplates::from_json(missing); }) == Errc::kTemplateError);
}

TEST_CASE("fill_template substitutes in one pass") {
  CHECK(fill_template("a {{x}} b", {{"x", "{{y}}"}, {"y", "no"}}) == "a {{y}} b");
  CHECK_THROWS_AS(fill_template("{{z}}", {}), Error);
}
