#include <doctest.h>

#include <algorithm>
#include <random>

#include "emreason/metrics.hpp"
#include "metrics_oracle.hpp"

using namespace em;

namespace {

struct Instance {
  std::vector<MatchPrediction> predictions;
  std::vector<LabeledGold> golds;
};

Instance random_instance(std::mt19937_64& rng, std::size_t max_n = 50) {
  Instance x;
  const auto n = rng() % (max_n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "p" + std::to_string(i);
    x.golds.push_back({id, GoldLabel{static_cast<int>(rng() % 2)}});
    MatchPrediction p;
    p.pair_id = id;
    p.decision = rng() % 2 == 0 ? Decision::kMatch : Decision::kNoMatch;
    x.predictions.push_back(p);
  }
  std::shuffle(x.predictions.begin(), x.predictions.end(), rng);
  return x;
}

Instance from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Instance x;
  auto add = [&](Decision d, int gold, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = "p" + std::to_string(x.golds.size());
      x.golds.push_back({id, GoldLabel{gold}});
      x.predictions.push_back({id, d, ParseStatus::kForcedExact, ""});
    }
  };
  add(Decision::kMatch, 1, tp);
  add(Decision::kMatch, 0, fp);
  add(Decision::kNoMatch, 0, tn);
  add(Decision::kNoMatch, 1, fn);
  return x;
}

Transcript with_usage(std::string id, Usage u) {
  Transcript t;
  t.pair_id = std::move(id);
  t.total_usage = u;
  return t;
}

}  // namespace

TEST_CASE("confusion on the 10-pair toy set") {
  const auto x = from_counts(2, 1, 6, 1);
  const auto c = confusion(x.predictions, x.golds);
  CHECK(c == ConfusionCounts{2, 1, 6, 1});
  const auto s = score(c);
  CHECK(s.precision == 2.0 / 3.0);
  CHECK(s.recall == 2.0 / 3.0);
  CHECK(s.f1 == 2.0 / 3.0);
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("zero-denominator conventions") {
  CHECK(score({3, 0, 5, 0}).f1 == 1.0);
  CHECK(score({0, 2, 5, 1}).f1 == 0.0);
  CHECK(score({0, 2, 5, 1}).precision == 0.0);
  const auto degenerate = score({0, 0, 7, 0});
  CHECK(degenerate.degenerate);
  CHECK(degenerate.f1 == 0.0);
  CHECK(confusion({}, {}) == ConfusionCounts{});
}

TEST_CASE("confusion rejects misaligned inputs") {
  auto x = from_counts(1, 1, 1, 1);
  auto shorter = x.golds;
  shorter.pop_back();
  try {
    confusion(x.predictions, shorter);
    FAIL("expected kLengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kLengthMismatch);
  }
  x.predictions[0].pair_id = "stranger";
  try {
    confusion(x.predictions, x.golds);
    FAIL("expected kUnknownPairId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kUnknownPairId);
  }
}

TEST_CASE("oracle: metrics equal an exact rational recount") {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_instance(rng);
    const auto oracle = emtest::oracle_scores(x.predictions, x.golds);
    const auto c = confusion(x.predictions, x.golds);
    REQUIRE(c == oracle.counts);
    const auto s = score(c);
    CHECK(s.precision == oracle.precision.value());
    CHECK(s.recall == oracle.recall.value());
    CHECK(s.f1 == oracle.f1.value());
    CHECK(f1(c) == s.f1);
    // f1 lies between precision and recall.
    CHECK(s.f1 >= std::min(s.precision, s.recall));
    CHECK(s.f1 <= std::max(s.precision, s.recall));
    // Permutation invariance.
    auto shuffled = x.predictions;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(confusion(shuffled, x.golds) == c);
  }
}

TEST_CASE("token report sums and rounds half up") {
  const std::vector<Transcript> two = {with_usage("a", {100, 50}), with_usage("b", {200, 50})};
  const auto r = token_report(two);
  CHECK(r.total == Usage{300, 100});
  CHECK(r.mean_per_pair == 200.0);
  CHECK(r.mean_per_pair_rounded == 200);
  const std::vector<Transcript> half = {with_usage("a", {1, 0}), with_usage("b", {1, 1})};
  CHECK(token_report(half).mean_per_pair_rounded == 2);  // 1.5 rounds up
  const std::vector<Transcript> below = {with_usage("a", {1, 0}), with_usage("b", {0, 0}), with_usage("c", {0, 0})};
  CHECK(token_report(below).mean_per_pair_rounded == 0);
  const auto empty = token_report({});
  CHECK(empty.n_pairs == 0);
  CHECK(empty.mean_per_pair == 0.0);
}

TEST_CASE("reports are order independent and round-trip through json") {
  const auto x = from_counts(2, 1, 6, 1);
  std::vector<Transcript> transcripts;
  for (const auto& g : x.golds) transcripts.push_back(with_usage(g.pair_id, {10, 3}));
  auto preds = x.predictions;
  preds[4].status = ParseStatus::kUnparseableDefaulted;
  const auto report = build_report("toy", StrategyKind::kBaseline, {}, preds, x.golds, transcripts);
  std::reverse(preds.begin(), preds.end());
  std::reverse(transcripts.begin(), transcripts.end());
  CHECK(build_report("toy", StrategyKind::kBaseline, {}, preds, x.golds, transcripts) == report);
  CHECK(report.n_unparseable == 1);
  CHECK(report.unparseable_rate == 0.1);
  CHECK(report.token_total == Usage{100, 30});
  CHECK(report.token_mean_per_pair == 13.0);

  const auto text = emit_report(report, ReportFormat::kJson);
  CHECK(report_from_json(nlohmann::json::parse(text)) == report);
  auto wrong = nlohmann::json::parse(text);
  wrong["schema_version"] = "em-report/0";
  CHECK_THROWS_AS(report_from_json(wrong), Error);

  const auto csv = emit_report(report, ReportFormat::kCsv);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK_THROWS_AS(parse_report_format("xml"), Error);
}

TEST_CASE("table renders F1 to three decimals") {
  EvalReport r;
  r.dataset_id = "AB";
  r.strategy = "baseline";
  r.f1 = 0.8491;
  r.token_mean_per_pair_rounded = 183;
  const auto table = emit_report(r, ReportFormat::kTable);
  CHECK(table.find("0.849") != std::string::npos);
  CHECK(table.find("0.8491") == std::string::npos);
  CHECK(table.find("183") != std::string::npos);
}

TEST_CASE("merged table puts methods side by side") {
  std::vector<EvalReport> reports(3);
  const char* methods[] = {"baseline", "cot_single", "cot_multi"};
  for (int i = 0; i < 3; ++i) {
    reports[i].dataset_id = "AB";
    reports[i].strategy = methods[i];
    reports[i].f1 = 0.5 + 0.1 * i;
  }
  const auto table = emit_merged_table(reports);
  const auto header = table.substr(0, table.find('\n'));
  CHECK(header.find("baseline F1") != std::string::npos);
  CHECK(header.find("cot_multi #Tokens") != std::string::npos);
  std::size_t rows = 0;
  for (auto at = table.find("\nAB"); at != std::string::npos; at = table.find("\nAB", at + 1)) ++rows;
  CHECK(rows == 1);
}
