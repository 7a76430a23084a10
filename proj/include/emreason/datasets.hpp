#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emreason/records.hpp"

namespace em {

enum class Split { kTrain, kValid, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

enum class DatasetFormat { kDeepMatcher, kWdcPairs };

std::string_view to_string(DatasetFormat format);
DatasetFormat parse_dataset_format(std::string_view text);

struct DatasetBundle {
  AttributeSchema schema;
  // Data domain used by domain-specific task frames ("product", "citation", ...).
  std::string domain;
  std::map<std::string, EntityRecord> table_a;
  std::map<std::string, EntityRecord> table_b;
  std::map<Split, std::vector<RecordPair>> splits;

  const std::vector<RecordPair>& split(Split which) const;
  bool has_split(Split which) const { return splits.contains(which); }

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

struct SplitStats {
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t n_attributes = 0;

  std::size_t size() const { return n_positive + n_negative; }

  /// Component-wise sum of counts; both sides must describe the same schema width.
  SplitStats& operator+=(const SplitStats& other);
  friend SplitStats operator+(SplitStats a, const SplitStats& b) { return a += b; }
  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

struct FewShotExample {
  RecordPair pair;
  GoldLabel answer;
};

/// Loads a benchmark directory. `dataset_id` defaults to the directory name.
///
/// deepmatcher: tableA.csv and tableB.csv (first column `id`) plus any of
/// train.csv / valid.csv / test.csv holding `ltable_id,rtable_id,label`.
/// wdc-pairs: train / valid / test as .csv or .jsonl, each row carrying
/// `left_<attr>`, `right_<attr>` (or `<attr>_left`, `<attr>_right`) and `label`.
///
/// Values are whitespace-trimmed; empty cells become missing values.
DatasetBundle load_bundle(const std::filesystem::path& dir, DatasetFormat format,
                          std::optional<std::string> dataset_id = std::nullopt);

/// Writes the bundle back in deepmatcher layout.
void write_deepmatcher(const DatasetBundle& bundle, const std::filesystem::path& dir);

SplitStats stats(const DatasetBundle& bundle, Split split);
SplitStats stats(const DatasetBundle& bundle);  // all splits combined
SplitStats stats(std::span<const RecordPair> pairs, std::size_t n_attributes);

/// Draws ceil(k/2) positives then floor(k/2) negatives from the train split,
/// skipping any train pair whose record ids also occur as a pair in
/// `eval_split`. Deterministic in (bundle, k, seed).
std::vector<FewShotExample> sample_few_shot(const DatasetBundle& bundle, std::size_t k,
                                            std::uint64_t seed, Split eval_split = Split::kTest);

/// Label-stratified subsample of `n` pairs, returned in their original order.
std::vector<RecordPair> stratified_sample(std::span<const RecordPair> pairs, std::size_t n,
                                          std::uint64_t seed);

/// The six public benchmarks with their published whole-dataset statistics.
struct BenchmarkInfo {
  std::string_view id;
  std::string_view name;
  std::string_view domain;
  DatasetFormat format;
  SplitStats expected;
  std::vector<std::string_view> directory_names;
};

std::span<const BenchmarkInfo> benchmark_catalog();
const BenchmarkInfo* find_benchmark(std::string_view id_or_name);

/// Catalog domain for a dataset id, or "generic" when unknown.
std::string domain_for(std::string_view dataset_id);

}  // namespace em
