#include <doctest.h>

#include <random>
#include <fstream>
#include <functional>
#include <set>

#include "emreason/csv.hpp"
#include "emreason/error.hpp"
#include "emreason/records.hpp"
#include "test_support.hpp"

using namespace em;

namespace {

AttributeSchema product_schema() { return AttributeSchema("ab", {"title", "manufacturer", "price"}); }

EntityRecord record(std::string id, std::initializer_list<std::pair<const char*, const char*>> values) {
  EntityRecord r;
  r.record_id = std::move(id);
  for (const auto& [k, v] : values) r.set(k, std::string(v));
  return r;
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

}  // namespace

TEST_CASE("schema rejects empty and duplicate attribute names") {
  CHECK(code_of([] { AttributeSchema("x", {"a", "a"}); }) == Errc::kInvalidArgument);
  CHECK(code_of([] { AttributeSchema("x", {"a", ""}); }) == Errc::kInvalidArgument);
  const auto s = product_schema();
  CHECK(s.index_of("price") == 2u);
  CHECK_FALSE(s.contains("year"));
}

TEST_CASE("empty strings are stored as missing values") {
  EntityRecord r;
  r.set("title", std::string());
  r.set("price", std::nullopt);
  CHECK_FALSE(r.get("title").has_value());
  CHECK_FALSE(r.get("price").has_value());
  CHECK_FALSE(r.get("nothing").has_value());
}

TEST_CASE("labeled-lines serialization follows schema order") {
  const auto r = record("1", {{"price", "9.99"}, {"title", "canon eos"}});
  CHECK(serialize_record(r, product_schema()) == "title: canon eos\nmanufacturer: \nprice: 9.99");
}

TEST_CASE("col-val serialization") {
  const auto r = record("1", {{"title", "canon eos"}, {"manufacturer", "canon"}});
  CHECK(serialize_record(r, product_schema(), SerializationStyle::kColVal) ==
        "COL title VAL canon eos COL manufacturer VAL canon COL price VAL ");
}

TEST_CASE("serialization rejects attributes outside the schema") {
  const auto r = record("1", {{"colour", "red"}});
  CHECK(code_of([&] { serialize_record(r, product_schema()); }) == Errc::kUnknownAttribute);
}

TEST_CASE("values with line breaks cannot forge another attribute") {
  const auto schema = AttributeSchema("x", {"a", "b"});
  const auto forged = record("1", {{"a", "x\nb: y"}});
  const auto honest = record("2", {{"a", "x"}, {"b", "y"}});
  CHECK(serialize_record(forged, schema) != serialize_record(honest, schema));
}

TEST_CASE("property: serialization covers every attribute once and is injective") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    const auto schema = emtest::random_schema(rng);
    std::map<std::string, EntityRecord> by_text;
    for (int i = 0; i < 40; ++i) {
      auto r = emtest::random_record(rng, schema, "r");
      if (rng() % 4 == 0) r.set(schema.attributes()[0], "line\nbreak\\n " + emtest::random_value(rng, 2));
      const auto text = serialize_record(r, schema);
      std::size_t lines = 1 + std::count(text.begin(), text.end(), '\n');
      CHECK(lines == schema.size());
      for (const auto& a : schema.attributes()) CHECK(text.find(a + ": ") != std::string::npos);
      auto [it, inserted] = by_text.emplace(text, r);
      if (!inserted) CHECK(it->second.values == r.values);
    }
  }
}

TEST_CASE("validate_pair reports each problem") {
  const auto schema = product_schema();
  RecordPair p{"p1", record("a", {{"title", "x"}}), record("", {{"colour", "red"}}), GoldLabel{2}};
  const auto result = validate_pair(p, schema);
  CHECK_FALSE(result.ok());
  std::set<ViolationKind> kinds;
  for (const auto& v : result.violations) kinds.insert(v.kind);
  CHECK(kinds == std::set<ViolationKind>{ViolationKind::kUnknownAttribute, ViolationKind::kMissingId,
                                         ViolationKind::kBadLabel});

  RecordPair good{"p2", record("a", {{"title", "x"}}), record("b", {{"price", "1"}}), GoldLabel{1}};
  CHECK(validate_pair(good, schema).ok());
}

TEST_CASE("csv parser handles quotes, embedded newlines, CRLF and BOM") {
  const std::string text = "\xEF\xBB\xBFid,title\r\n1,\"a, \"\"quoted\"\" title\"\r\n2,\"two\nlines\"\n\n3,\n";
  const auto rows = csv::parse(text);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == csv::Row{"id", "title"});
  CHECK(rows[1] == csv::Row{"1", "a, \"quoted\" title"});
  CHECK(rows[2] == csv::Row{"2", "two\nlines"});
  CHECK(rows[3] == csv::Row{"3", ""});
  CHECK(code_of([] { csv::parse("a,\"open\n"); }) == Errc::kMalformedRow);
}

TEST_CASE("csv round trip") {
  std::mt19937_64 rng(3);
  emtest::TempDir dir;
  std::vector<csv::Row> rows;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({std::to_string(i), emtest::random_value(rng) + (i % 3 == 0 ? "\"q\",\nx" : ""), ""});
    rows.back()[2] = "tail";
  }
  csv::write_file(dir / "t.csv", {"id", "text", "tail"}, rows);
  const auto table = csv::read_file(dir / "t.csv");
  CHECK(table.header == csv::Row{"id", "text", "tail"});
  CHECK(table.rows == rows);
}

TEST_CASE("csv rows with the wrong width name file and line") {
  emtest::TempDir dir;
  std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3\n";
  try {
    csv::read_file(dir / "bad.csv");
    FAIL("expected kMalformedRow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMalformedRow);
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
}
