#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "emreason/datasets.hpp"
#include "emreason/error.hpp"
#include "test_support.hpp"

using namespace em;

namespace {

void write(const std::filesystem::path& path, const std::string& text) { std::ofstream(path) << text; }

void small_deepmatcher(const std::filesystem::path& dir) {
  write(dir / "tableA.csv", "id,title,price\n1,alpha one,3\n2,beta,\n");
  write(dir / "tableB.csv", "id,title,price\n7,alpha 1,3.0\n8,gamma,9\n");
  write(dir / "train.csv", "ltable_id,rtable_id,label\n1,7,1\n2,8,0\n");
  write(dir / "test.csv", "ltable_id,rtable_id,label\n1,8,0.0\n2,7,1.0\n");
}

Errc load_error(const std::filesystem::path& dir, DatasetFormat format = DatasetFormat::kDeepMatcher) {
  try {
    load_bundle(dir, format);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::kInvalidArgument;
}

}  // namespace

TEST_CASE("fixture10 loads with the expected shape") {
  const auto b = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher);
  CHECK(b.schema.dataset_id() == "fixture10");
  CHECK(b.schema.attributes() == std::vector<std::string>{"title", "manufacturer", "price"});
  CHECK(stats(b, Split::kTest) == SplitStats{3, 7, 3});
  CHECK(stats(b, Split::kTrain) == SplitStats{3, 3, 3});
  const auto& test = b.split(Split::kTest);
  CHECK(test.front().pair_id == "test-000000");
  CHECK(test.front().left.get("title") == "canon eos 5d mark iii body");
  CHECK(test[9].right.record_id == "8");
  // Quoted cell with a doubled quote.
  CHECK(b.table_a.at("11").get("title") == "dell 24\" monitor p2419h");
}

TEST_CASE("deepmatcher loader normalizes values and labels") {
  emtest::TempDir dir;
  small_deepmatcher(dir.path());
  const auto b = load_bundle(dir.path(), DatasetFormat::kDeepMatcher, "tiny");
  CHECK(b.schema.dataset_id() == "tiny");
  CHECK_FALSE(b.table_a.at("2").get("price").has_value());
  CHECK(b.split(Split::kTest)[1].gold == GoldLabel{1});
  CHECK_FALSE(b.has_split(Split::kValid));
  CHECK(b.domain == "generic");
}

TEST_CASE("dangling record references are rejected") {
  emtest::TempDir dir;
  small_deepmatcher(dir.path());
  write(dir / "test.csv", "ltable_id,rtable_id,label\n1,99,0\n");
  CHECK(load_error(dir.path()) == Errc::kDanglingReference);
}

TEST_CASE("labels outside {0,1} are rejected") {
  emtest::TempDir dir;
  small_deepmatcher(dir.path());
  write(dir / "test.csv", "ltable_id,rtable_id,label\n1,7,2\n");
  CHECK(load_error(dir.path()) == Errc::kBadLabel);
  write(dir / "test.csv", "ltable_id,rtable_id,label\n1,7,yes\n");
  CHECK(load_error(dir.path()) == Errc::kBadLabel);
}

TEST_CASE("missing tables are reported") {
  emtest::TempDir dir;
  small_deepmatcher(dir.path());
  std::filesystem::remove(dir / "tableB.csv");
  CHECK(load_error(dir.path()) == Errc::kMissingFile);
  emtest::TempDir empty;
  CHECK(load_error(empty.path(), DatasetFormat::kWdcPairs) == Errc::kMissingFile);
}

TEST_CASE("wdc pairs load from jsonl and csv") {
  emtest::TempDir dir;
  write(dir / "test.jsonl",
        "{\"pair_id\":\"a#b\",\"label\":1,\"id_left\":\"a\",\"title_left\":\"x y\",\"brand_left\":null,"
        "\"id_right\":\"b\",\"title_right\":\"x  y \",\"brand_right\":\"z\"}\n");
  write(dir / "train.csv", "left_id,left_title,left_brand,right_id,right_title,right_brand,label\n"
                           "c,p,q,d,p,r,0\n");
  const auto b = load_bundle(dir.path(), DatasetFormat::kWdcPairs, "WDC");
  CHECK(b.schema.size() == 2);
  CHECK(b.schema.contains("title"));
  CHECK(b.schema.contains("brand"));
  const auto& t = b.split(Split::kTest).at(0);
  CHECK(t.pair_id == "a#b");
  CHECK(t.left.record_id == "a");
  CHECK_FALSE(t.left.get("brand").has_value());
  CHECK(t.right.get("title") == "x  y");
  CHECK(stats(b) == SplitStats{1, 1, 2});
  CHECK(b.domain == "product");
}

TEST_CASE("round trip through the deepmatcher layout") {
  const auto original = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher, "rt");
  emtest::TempDir dir;
  write_deepmatcher(original, dir.path());
  const auto again = load_bundle(dir.path(), DatasetFormat::kDeepMatcher, "rt");
  CHECK(again == original);
}

TEST_CASE("property: split statistics are additive") {
  const auto b = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher);
  SplitStats sum{0, 0, b.schema.size()};
  for (auto s : {Split::kTrain, Split::kValid, Split::kTest}) {
    if (b.has_split(s)) sum += stats(b, s);
  }
  CHECK(sum == stats(b));

  std::mt19937_64 rng(11);
  const auto schema = AttributeSchema("r", {"a"});
  for (int round = 0; round < 100; ++round) {
    std::vector<RecordPair> pairs;
    const auto n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) pairs.push_back(emtest::random_pair(rng, schema, i));
    const auto cut = n == 0 ? 0 : rng() % (n + 1);
    const std::span<const RecordPair> all(pairs);
    CHECK(stats(all.first(cut), 1) + stats(all.subspan(cut), 1) == stats(all, 1));
  }
}

TEST_CASE("few-shot sampling draws balanced, disjoint exemplars") {
  const auto b = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher);
  CHECK(sample_few_shot(b, 0, 1).empty());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto shots = sample_few_shot(b, 2, seed);
    REQUIRE(shots.size() == 2);
    CHECK(shots[0].answer.is_match());
    CHECK_FALSE(shots[1].answer.is_match());
    std::set<std::pair<std::string, std::string>> test_ids;
    for (const auto& p : b.split(Split::kTest)) test_ids.emplace(p.left.record_id, p.right.record_id);
    for (const auto& s : shots) CHECK_FALSE(test_ids.contains({s.pair.left.record_id, s.pair.right.record_id}));
    CHECK(sample_few_shot(b, 2, seed)[0].pair == shots[0].pair);
  }
  const auto three = sample_few_shot(b, 3, 5);
  CHECK(std::count_if(three.begin(), three.end(), [](const auto& s) { return s.answer.is_match(); }) == 2);
}

TEST_CASE("few-shot sampling fails when train lacks a class") {
  emtest::TempDir dir;
  small_deepmatcher(dir.path());
  write(dir / "train.csv", "ltable_id,rtable_id,label\n2,8,0\n");
  const auto b = load_bundle(dir.path(), DatasetFormat::kDeepMatcher);
  try {
    sample_few_shot(b, 2, 1);
    FAIL("expected kInsufficientExamples");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kInsufficientExamples);
  }
}

TEST_CASE("stratified sample keeps order and class balance") {
  const auto b = load_bundle(emtest::fixture10_dir(), DatasetFormat::kDeepMatcher);
  const auto& test = b.split(Split::kTest);
  const auto sample = stratified_sample(test, 5, 9);
  REQUIRE(sample.size() == 5);
  CHECK(std::is_sorted(sample.begin(), sample.end(),
                       [](const auto& x, const auto& y) { return x.pair_id < y.pair_id; }));
  const auto s = stats(sample, 3);
  CHECK(s.n_positive >= 1);
  CHECK(s.n_positive <= 2);
  CHECK(stratified_sample(test, 50, 9).size() == test.size());
}

TEST_CASE("benchmark catalog holds the published statistics") {
  const auto ds = find_benchmark("DS");
  REQUIRE(ds != nullptr);
  CHECK(ds->expected == SplitStats{5347, 23360, 4});
  CHECK(find_benchmark("Abt-Buy")->expected == SplitStats{1028, 8547, 3});
  CHECK(find_benchmark("DA")->expected == SplitStats{2220, 10143, 4});
  CHECK(find_benchmark("WA")->expected == SplitStats{962, 9280, 5});
  CHECK(find_benchmark("AG")->expected == SplitStats{1167, 10293, 3});
  CHECK(find_benchmark("WDC")->expected == SplitStats{2250, 7992, 3});
  CHECK(benchmark_catalog().size() == 6);
  CHECK(domain_for("WA") == "electronics");
  CHECK(domain_for("unknown") == "generic");
}
