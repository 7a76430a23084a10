#include <doctest.h>

#include <random>

#include "emreason/backends.hpp"
#include "emreason/datasets.hpp"
#include "emreason/strategies.hpp"
#include "test_support.hpp"

using namespace em;

namespace {

constexpr StrategyKind kAll[] = {StrategyKind::kBaseline, StrategyKind::kCotSingle, StrategyKind::kCotMulti,
                                 StrategyKind::kDebate};

// Heuristic answers, except that one step always fails.
class FailingStep : public Backend {
 public:
  explicit FailingStep(StepId step) : step_(step) {}
  std::string name() const override { return "failing"; }
  Completion complete(const CompletionRequest& r) override {
    if (r.tag == step_) throw Error(Errc::kBackendUnavailable, "down");
    ++calls;
    return inner_.complete(r);
  }
  int calls = 0;

 private:
  StepId step_;
  HeuristicBackend inner_;
};

struct Fixture {
  DatasetBundle bundle = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher);
  PromptContext ctx;
  Fixture() {
    ctx.schema = bundle.schema;
    ctx.domain = bundle.domain;
  }
  const RecordPair& pair(std::size_t i = 0) const { return bundle.split(Split::kTest).at(i); }
};

GatewayOptions no_cache() {
  GatewayOptions o;
  o.cache_enabled = false;
  o.sleep = [](auto) {};
  return o;
}

}  // namespace

TEST_CASE("step sequences") {
  CHECK(step_sequence(StrategyKind::kBaseline) == std::vector{StepId::kBaseline});
  CHECK(step_sequence(StrategyKind::kCotSingle) == std::vector{StepId::kCotSingle});
  CHECK(step_sequence(StrategyKind::kCotMulti) ==
        std::vector{StepId::kStep1Tokens, StepId::kStep2Attributes, StepId::kStep3Decision});
  CHECK(step_sequence(StrategyKind::kDebate) ==
        std::vector{StepId::kDebatePro, StepId::kDebateCon, StepId::kDebateSynthesis});
  CHECK(parse_strategy("multi-prompt") == StrategyKind::kCotMulti);
  CHECK_THROWS_AS(parse_strategy("tree"), Error);
}

TEST_CASE("property: transcript shape, chaining and usage sum on random pairs") {
  std::mt19937_64 rng(8);
  Gateway gateway(std::make_shared<HeuristicBackend>(), no_cache());
  for (int i = 0; i < 100; ++i) {
    PromptContext ctx;
    ctx.schema = emtest::random_schema(rng);
    const auto pair = emtest::random_pair(rng, ctx.schema, static_cast<std::size_t>(i));
    PromptVariant v;
    v.hints = rng() % 2 == 0;
    v.response_frame = rng() % 2 == 0 ? ResponseFrame::kForced : ResponseFrame::kFree;
    for (auto kind : kAll) {
      const auto t = run_strategy(kind, pair, v, {}, gateway, ctx);
      const auto steps = step_sequence(kind);
      REQUIRE(t.turns.size() == steps.size());
      Usage sum;
      for (std::size_t k = 0; k < t.turns.size(); ++k) {
        CHECK(t.turns[k].step == steps[k]);
        CHECK(t.turns[k].request.tag == steps[k]);
        sum += t.turns[k].completion.usage;
      }
      CHECK(sum == t.total_usage);
      for (std::size_t k = 1; k < t.turns.size(); ++k) {
        const auto prompt = t.turns[k].request.messages.text();
        for (std::size_t earlier = 0; earlier < k; ++earlier) {
          if (kind == StrategyKind::kDebate && k == 1) continue;  // con is independent of pro
          CHECK(prompt.find(t.turns[earlier].completion.text) != std::string::npos);
        }
      }
      if (kind == StrategyKind::kDebate) {
        CHECK(t.turns[1].request.messages.text().find(t.turns[0].completion.text) == std::string::npos);
      }
    }
  }
}

TEST_CASE("debate on identical records ends with a match") {
  Fixture f;
  auto pair = f.pair();
  pair.right = pair.left;
  Gateway gateway(std::make_shared<HeuristicBackend>(), no_cache());
  const auto t = run_strategy(StrategyKind::kDebate, pair, {}, {}, gateway, f.ctx);
  CHECK(t.turns.back().completion.text.find("Match: Yes") != std::string::npos);
}

TEST_CASE("shots appear only in decision-bearing prompts") {
  Fixture f;
  const auto shots = sample_few_shot(f.bundle, 2, 42);
  PromptVariant v;
  v.shots = 2;
  Gateway gateway(std::make_shared<HeuristicBackend>(), no_cache());
  for (auto kind : kAll) {
    const auto t = run_strategy(kind, f.pair(), v, shots, gateway, f.ctx);
    for (const auto& turn : t.turns) {
      const bool has = turn.request.messages.text().find("Example 1:") != std::string::npos;
      CHECK(has == is_decision_step(turn.step));
    }
  }
}

TEST_CASE("a failing step aborts the pair and names the step") {
  Fixture f;
  auto backend = std::make_shared<FailingStep>(StepId::kStep2Attributes);
  Gateway gateway(backend, no_cache());
  try {
    run_strategy(StrategyKind::kCotMulti, f.pair(), {}, {}, gateway, f.ctx);
    FAIL("expected StepFailed");
  } catch (const StepFailed& e) {
    CHECK(e.step() == StepId::kStep2Attributes);
    CHECK(e.code() == Errc::kBackendUnavailable);
  }
  CHECK(backend->calls == 1);
}

TEST_CASE("strategies are deterministic and transcripts round-trip") {
  Fixture f;
  Gateway a(std::make_shared<HeuristicBackend>(), no_cache());
  Gateway b(std::make_shared<HeuristicBackend>(), no_cache());
  for (auto kind : kAll) {
    const auto x = run_strategy(kind, f.pair(3), {}, {}, a, f.ctx);
    const auto y = run_strategy(kind, f.pair(3), {}, {}, b, f.ctx);
    CHECK(transcript_to_json(x).dump() == transcript_to_json(y).dump());
    const auto back = transcript_from_json(nlohmann::json::parse(transcript_to_json(x).dump()));
    CHECK(transcript_to_json(back).dump() == transcript_to_json(x).dump());
  }
}
