#include "emreason/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>

#include "emreason/csv.hpp"
#include "emreason/error.hpp"

namespace em {
namespace fs = std::filesystem;

namespace {

constexpr Split kAllSplits[] = {Split::kTrain, Split::kValid, Split::kTest};

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::optional<std::string> cell(std::string_view raw) {
  auto value = trim(raw);
  if (value.empty()) return std::nullopt;
  return value;
}

GoldLabel parse_label(std::string_view raw, const std::string& where) {
  const auto text = trim(raw);
  if (text == "1" || text == "1.0") return GoldLabel{1};
  if (text == "0" || text == "0.0") return GoldLabel{0};
  throw Error(Errc::kBadLabel, where + ": label '" + text + "' is not 0 or 1");
}

std::string pair_id_for(Split split, std::size_t row) {
  std::string digits = std::to_string(row);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return std::string(to_string(split)) + "-" + digits;
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

struct LoadedTable {
  std::vector<std::string> attributes;
  std::map<std::string, EntityRecord> records;
};

LoadedTable load_record_table(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::kMissingFile, path.string() + " not found");
  auto table = csv::read_file(path);
  if (table.header.empty() || trim(table.header.front()) != "id") {
    throw Error(Errc::kMalformedRow, path.string() + ": first column must be 'id'");
  }
  LoadedTable out;
  for (std::size_t c = 1; c < table.header.size(); ++c) out.attributes.push_back(trim(table.header[c]));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    EntityRecord record;
    record.record_id = trim(row[0]);
    if (record.record_id.empty()) {
      throw Error(Errc::kMalformedRow, where(path, table.lines[r]) + ": empty record id");
    }
    for (std::size_t c = 1; c < row.size(); ++c) record.set(out.attributes[c - 1], cell(row[c]));
    auto id = record.record_id;
    if (!out.records.emplace(id, std::move(record)).second) {
      throw Error(Errc::kMalformedRow, where(path, table.lines[r]) + ": duplicate record id '" + id + "'");
    }
  }
  return out;
}

std::vector<RecordPair> load_deepmatcher_pairs(const fs::path& path, Split split,
                                               const std::map<std::string, EntityRecord>& table_a,
                                               const std::map<std::string, EntityRecord>& table_b) {
  auto table = csv::read_file(path);
  std::vector<RecordPair> pairs;
  if (table.header.empty()) return pairs;

  const auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (trim(table.header[c]) == name) return c;
    }
    throw Error(Errc::kMalformedRow, path.string() + ": missing column '" + std::string(name) + "'");
  };
  const std::size_t l_col = column("ltable_id");
  const std::size_t r_col = column("rtable_id");
  const std::size_t label_col = column("label");

  pairs.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto loc = where(path, table.lines[r]);
    const auto left_id = trim(row[l_col]);
    const auto right_id = trim(row[r_col]);
    auto left = table_a.find(left_id);
    if (left == table_a.end()) {
      throw Error(Errc::kDanglingReference, loc + ": ltable_id '" + left_id + "' not in tableA");
    }
    auto right = table_b.find(right_id);
    if (right == table_b.end()) {
      throw Error(Errc::kDanglingReference, loc + ": rtable_id '" + right_id + "' not in tableB");
    }
    pairs.push_back(RecordPair{pair_id_for(split, r), left->second, right->second,
                               parse_label(row[label_col], loc)});
  }
  return pairs;
}

DatasetBundle load_deepmatcher(const fs::path& dir, const std::string& dataset_id) {
  auto a = load_record_table(dir / "tableA.csv");
  auto b = load_record_table(dir / "tableB.csv");
  if (a.attributes != b.attributes) {
    throw Error(Errc::kMalformedRow, dir.string() + ": tableA and tableB headers differ");
  }
  DatasetBundle bundle;
  bundle.schema = AttributeSchema(dataset_id, a.attributes);
  bundle.domain = domain_for(dataset_id);
  bundle.table_a = std::move(a.records);
  bundle.table_b = std::move(b.records);

  bool any = false;
  for (Split split : kAllSplits) {
    const auto path = dir / (std::string(to_string(split)) + ".csv");
    if (!fs::exists(path)) continue;
    any = true;
    bundle.splits[split] = load_deepmatcher_pairs(path, split, bundle.table_a, bundle.table_b);
  }
  if (!any) throw Error(Errc::kMissingFile, dir.string() + ": no train/valid/test pair files");
  return bundle;
}

// ---- wdc-pairs -------------------------------------------------------------

enum class Side { kLeft, kRight };

struct ColumnRole {
  std::optional<Side> side;
  std::string attribute;
};

ColumnRole classify(std::string_view column) {
  const auto name = trim(column);
  if (name.starts_with("left_")) return {Side::kLeft, name.substr(5)};
  if (name.starts_with("right_")) return {Side::kRight, name.substr(6)};
  if (name.ends_with("_left")) return {Side::kLeft, name.substr(0, name.size() - 5)};
  if (name.ends_with("_right")) return {Side::kRight, name.substr(0, name.size() - 6)};
  return {std::nullopt, name};
}

// A WDC row reduced to column name -> optional text.
using FlatRow = std::vector<std::pair<std::string, std::optional<std::string>>>;

struct WdcSplitFile {
  fs::path path;
  std::vector<std::string> columns;
  std::vector<FlatRow> rows;
  std::vector<std::size_t> lines;
};

std::optional<std::string> json_cell(const nlohmann::json& value) {
  if (value.is_null()) return std::nullopt;
  if (value.is_string()) return cell(value.get<std::string>());
  return cell(value.dump());
}

WdcSplitFile read_wdc_split(const fs::path& path) {
  WdcSplitFile out;
  out.path = path;
  if (path.extension() == ".csv") {
    auto table = csv::read_file(path);
    out.columns = table.header;
    for (auto& c : out.columns) c = trim(c);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      FlatRow row;
      for (std::size_t c = 0; c < out.columns.size(); ++c) row.emplace_back(out.columns[c], cell(table.rows[r][c]));
      out.rows.push_back(std::move(row));
      out.lines.push_back(table.lines[r]);
    }
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    nlohmann::ordered_json object;
    try {
      object = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kMalformedRow, where(path, number) + ": " + e.what());
    }
    if (!object.is_object()) throw Error(Errc::kMalformedRow, where(path, number) + ": expected a JSON object");
    FlatRow row;
    for (const auto& [key, value] : object.items()) {
      if (out.rows.empty() && std::find(out.columns.begin(), out.columns.end(), key) == out.columns.end()) {
        out.columns.push_back(key);
      }
      row.emplace_back(key, json_cell(value));
    }
    out.rows.push_back(std::move(row));
    out.lines.push_back(number);
  }
  return out;
}

std::optional<fs::path> find_split_file(const fs::path& dir, Split split) {
  for (const char* ext : {".jsonl", ".csv"}) {
    auto path = dir / (std::string(to_string(split)) + ext);
    if (fs::exists(path)) return path;
  }
  return std::nullopt;
}

DatasetBundle load_wdc(const fs::path& dir, const std::string& dataset_id) {
  std::map<Split, WdcSplitFile> files;
  for (Split split : kAllSplits) {
    if (auto path = find_split_file(dir, split)) files.emplace(split, read_wdc_split(*path));
  }
  if (files.empty()) throw Error(Errc::kMissingFile, dir.string() + ": no train/valid/test split files");

  // Schema comes from the first split's left-side columns, in column order.
  std::vector<std::string> attributes;
  {
    const auto& first = files.begin()->second;
    std::set<std::string> right;
    for (const auto& column : first.columns) {
      auto role = classify(column);
      if (role.side == Side::kRight) right.insert(role.attribute);
    }
    for (const auto& column : first.columns) {
      auto role = classify(column);
      if (role.side != Side::kLeft || role.attribute == "id") continue;
      if (!right.contains(role.attribute)) {
        throw Error(Errc::kMalformedRow, first.path.string() + ": column '" + column + "' has no right-side counterpart");
      }
      attributes.push_back(role.attribute);
    }
  }

  DatasetBundle bundle;
  bundle.schema = AttributeSchema(dataset_id, attributes);
  bundle.domain = domain_for(dataset_id);

  for (auto& [split, file] : files) {
    auto& pairs = bundle.splits[split];
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
      const auto loc = where(file.path, file.lines[r]);
      RecordPair pair;
      pair.pair_id = pair_id_for(split, r);
      std::optional<GoldLabel> label;
      for (const auto& [column, value] : file.rows[r]) {
        auto role = classify(column);
        if (!role.side) {
          if (role.attribute == "label") label = parse_label(value.value_or(""), loc);
          if (role.attribute == "pair_id" && value) pair.pair_id = *value;
          continue;
        }
        auto& record = *role.side == Side::kLeft ? pair.left : pair.right;
        if (role.attribute == "id") {
          record.record_id = value.value_or("");
        } else if (bundle.schema.contains(role.attribute)) {
          record.set(role.attribute, value);
        } else {
          throw Error(Errc::kMalformedRow, loc + ": attribute '" + role.attribute + "' not in schema");
        }
      }
      if (!label) throw Error(Errc::kBadLabel, loc + ": missing label");
      pair.gold = label;
      if (pair.left.record_id.empty()) pair.left.record_id = pair.pair_id + "-l";
      if (pair.right.record_id.empty()) pair.right.record_id = pair.pair_id + "-r";
      for (const auto& name : attributes) {
        if (!pair.left.values.contains(name)) pair.left.set(name, std::nullopt);
        if (!pair.right.values.contains(name)) pair.right.set(name, std::nullopt);
      }
      bundle.table_a.try_emplace(pair.left.record_id, pair.left);
      bundle.table_b.try_emplace(pair.right.record_id, pair.right);
      pairs.push_back(std::move(pair));
    }
  }
  return bundle;
}

// Partial Fisher-Yates over indices; `rng() % n` keeps the draw portable
// across standard libraries.
std::vector<std::size_t> draw(std::size_t population, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "test";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "valid" || text == "validation") return Split::kValid;
  if (text == "test") return Split::kTest;
  throw Error(Errc::kUnknownSplit, "unknown split '" + std::string(text) + "'");
}

std::string_view to_string(DatasetFormat format) {
  return format == DatasetFormat::kDeepMatcher ? "deepmatcher" : "wdc-pairs";
}

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "deepmatcher") return DatasetFormat::kDeepMatcher;
  if (text == "wdc-pairs" || text == "wdc") return DatasetFormat::kWdcPairs;
  throw Error(Errc::kUnsupportedFormat, "unknown dataset format '" + std::string(text) + "'");
}

const std::vector<RecordPair>& DatasetBundle::split(Split which) const {
  auto it = splits.find(which);
  if (it == splits.end()) {
    throw Error(Errc::kUnknownSplit, "dataset '" + schema.dataset_id() + "' has no " +
                                         std::string(to_string(which)) + " split");
  }
  return it->second;
}

SplitStats& SplitStats::operator+=(const SplitStats& other) {
  n_positive += other.n_positive;
  n_negative += other.n_negative;
  n_attributes = std::max(n_attributes, other.n_attributes);
  return *this;
}

DatasetBundle load_bundle(const fs::path& dir, DatasetFormat format, std::optional<std::string> dataset_id) {
  if (!fs::is_directory(dir)) throw Error(Errc::kMissingFile, dir.string() + " is not a directory");
  auto id = dataset_id.value_or(fs::absolute(dir).lexically_normal().filename().string());
  if (id.empty()) id = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  return format == DatasetFormat::kDeepMatcher ? load_deepmatcher(dir, id) : load_wdc(dir, id);
}

void write_deepmatcher(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  csv::Row header{"id"};
  for (const auto& name : bundle.schema.attributes()) header.push_back(name);

  const auto write_table = [&](const std::map<std::string, EntityRecord>& table, const char* file) {
    std::vector<csv::Row> rows;
    for (const auto& [id, record] : table) {
      csv::Row row{id};
      for (const auto& name : bundle.schema.attributes()) row.emplace_back(record.get(name).value_or(""));
      rows.push_back(std::move(row));
    }
    csv::write_file(dir / file, header, rows);
  };
  write_table(bundle.table_a, "tableA.csv");
  write_table(bundle.table_b, "tableB.csv");

  for (const auto& [split, pairs] : bundle.splits) {
    std::vector<csv::Row> rows;
    for (const auto& pair : pairs) {
      rows.push_back({pair.left.record_id, pair.right.record_id,
                      std::to_string(pair.gold.value_or(GoldLabel{0}).value)});
    }
    csv::write_file(dir / (std::string(to_string(split)) + ".csv"), {"ltable_id", "rtable_id", "label"}, rows);
  }
}

SplitStats stats(std::span<const RecordPair> pairs, std::size_t n_attributes) {
  SplitStats out;
  out.n_attributes = n_attributes;
  for (const auto& pair : pairs) {
    if (pair.gold && pair.gold->is_match()) {
      ++out.n_positive;
    } else {
      ++out.n_negative;
    }
  }
  return out;
}

SplitStats stats(const DatasetBundle& bundle, Split split) {
  return stats(bundle.split(split), bundle.schema.size());
}

SplitStats stats(const DatasetBundle& bundle) {
  SplitStats total;
  total.n_attributes = bundle.schema.size();
  for (const auto& [split, pairs] : bundle.splits) total += stats(pairs, bundle.schema.size());
  return total;
}

std::vector<FewShotExample> sample_few_shot(const DatasetBundle& bundle, std::size_t k,
                                            std::uint64_t seed, Split eval_split) {
  if (k == 0) return {};
  const std::size_t want_pos = (k + 1) / 2;
  const std::size_t want_neg = k / 2;

  std::set<std::pair<std::string, std::string>> held_out;
  if (eval_split != Split::kTrain && bundle.has_split(eval_split)) {
    for (const auto& pair : bundle.split(eval_split)) held_out.emplace(pair.left.record_id, pair.right.record_id);
  }

  std::vector<const RecordPair*> positives;
  std::vector<const RecordPair*> negatives;
  if (bundle.has_split(Split::kTrain) && eval_split != Split::kTrain) {
    for (const auto& pair : bundle.split(Split::kTrain)) {
      if (!pair.gold || held_out.contains({pair.left.record_id, pair.right.record_id})) continue;
      (pair.gold->is_match() ? positives : negatives).push_back(&pair);
    }
  }
  if (positives.size() < want_pos || negatives.size() < want_neg) {
    throw Error(Errc::kInsufficientExamples,
                "need " + std::to_string(want_pos) + " positive and " + std::to_string(want_neg) +
                    " negative train pairs, have " + std::to_string(positives.size()) + " and " +
                    std::to_string(negatives.size()));
  }

  std::mt19937_64 rng(seed);
  std::vector<FewShotExample> out;
  for (auto i : draw(positives.size(), want_pos, rng)) out.push_back({*positives[i], *positives[i]->gold});
  for (auto i : draw(negatives.size(), want_neg, rng)) out.push_back({*negatives[i], *negatives[i]->gold});
  return out;
}

std::vector<RecordPair> stratified_sample(std::span<const RecordPair> pairs, std::size_t n, std::uint64_t seed) {
  if (n >= pairs.size()) return {pairs.begin(), pairs.end()};
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (pairs[i].gold && pairs[i].gold->is_match() ? pos : neg).push_back(i);
  }
  // Round-half-up share of positives, kept inside the available strata.
  std::size_t n_pos = (2 * n * pos.size() + pairs.size()) / (2 * pairs.size());
  n_pos = std::min(n_pos, pos.size());
  std::size_t n_neg = std::min(n - n_pos, neg.size());
  n_pos = n - n_neg;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (auto i : draw(pos.size(), n_pos, rng)) chosen.push_back(pos[i]);
  for (auto i : draw(neg.size(), n_neg, rng)) chosen.push_back(neg[i]);
  std::sort(chosen.begin(), chosen.end());

  std::vector<RecordPair> out;
  out.reserve(chosen.size());
  for (auto i : chosen) out.push_back(pairs[i]);
  return out;
}

std::span<const BenchmarkInfo> benchmark_catalog() {
  static const std::vector<BenchmarkInfo> catalog = {
      {"AB", "Abt-Buy", "product", DatasetFormat::kDeepMatcher, {1028, 8547, 3}, {"AB", "Abt-Buy", "abt_buy"}},
      {"DA", "DBLP-ACM", "citation", DatasetFormat::kDeepMatcher, {2220, 10143, 4}, {"DA", "DBLP-ACM", "dblp_acm"}},
      {"DS", "DBLP-Scholar", "citation", DatasetFormat::kDeepMatcher, {5347, 23360, 4},
       {"DS", "DBLP-Scholar", "DBLP-GoogleScholar", "dblp_scholar"}},
      {"WA", "Walmart-Amazon", "electronics", DatasetFormat::kDeepMatcher, {962, 9280, 5},
       {"WA", "Walmart-Amazon", "walmart_amazon"}},
      {"AG", "Amazon-Google", "software", DatasetFormat::kDeepMatcher, {1167, 10293, 3},
       {"AG", "Amazon-Google", "amazon_google"}},
      {"WDC", "WDC Products", "product", DatasetFormat::kWdcPairs, {2250, 7992, 3}, {"WDC", "WDC-Products", "wdc"}},
  };
  return catalog;
}

const BenchmarkInfo* find_benchmark(std::string_view id_or_name) {
  const auto needle = lower(id_or_name);
  for (const auto& info : benchmark_catalog()) {
    if (lower(info.id) == needle || lower(info.name) == needle) return &info;
    for (auto alias : info.directory_names) {
      if (lower(alias) == needle) return &info;
    }
  }
  return nullptr;
}

std::string domain_for(std::string_view dataset_id) {
  if (const auto* info = find_benchmark(dataset_id)) return std::string(info->domain);
  return "generic";
}

}  // namespace em
