#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emreason/decoding.hpp"
#include "emreason/gateway.hpp"
#include "emreason/records.hpp"
#include "emreason/strategies.hpp"

namespace em {

inline constexpr std::string_view kReportSchemaVersion = "em-report/1";

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct LabeledGold {
  std::string pair_id;
  GoldLabel label;
};

/// Joins predictions to golds by pair id. kLengthMismatch when the lists
/// differ in length, kUnknownPairId when a prediction has no gold.
ConfusionCounts confusion(std::span<const MatchPrediction> predictions, std::span<const LabeledGold> golds);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // tp = fp = fn = 0: nothing to score; all three values are reported as 0.
  bool degenerate = false;
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2tp/(2tp+fp+fn) (the
/// harmonic mean in closed form). Any score is 0 when tp = 0.
Scores score(const ConfusionCounts& counts);
double f1(const ConfusionCounts& counts);

struct TokenReport {
  Usage total;
  std::size_t n_pairs = 0;
  double mean_per_pair = 0.0;           // (input + output) / n_pairs, 0 when empty
  std::uint64_t mean_per_pair_rounded = 0;  // round half up
};

TokenReport token_report(std::span<const Transcript> transcripts);

struct EvalReport {
  std::string schema_version = std::string(kReportSchemaVersion);
  std::string dataset_id;
  std::string strategy;
  PromptVariant variant;
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate_split = false;
  Usage token_total;
  double token_mean_per_pair = 0.0;
  std::uint64_t token_mean_per_pair_rounded = 0;
  std::size_t n_unparseable = 0;
  double unparseable_rate = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_errors = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Aggregates one run. Inputs are ordered by pair id first, so the result
/// does not depend on completion order.
EvalReport build_report(std::string dataset_id, StrategyKind strategy, const PromptVariant& variant,
                        std::span<const MatchPrediction> predictions, std::span<const LabeledGold> golds,
                        std::span<const Transcript> transcripts, std::size_t n_errors = 0);

enum class ReportFormat { kJson, kCsv, kTable };

/// Accepts "json", "csv" and "table"; anything else is kUnsupportedFormat.
ReportFormat parse_report_format(std::string_view text);

std::string emit_report(const EvalReport& report, ReportFormat format);

nlohmann::ordered_json report_to_json(const EvalReport& report);
/// kSchemaMismatch when the document carries another schema version.
EvalReport report_from_json(const nlohmann::json& j);

/// Rows of several reports, one per line under a single header.
std::string emit_reports_csv(std::span<const EvalReport> reports);
std::string emit_reports_table(std::span<const EvalReport> reports);

/// Side-by-side layout: one row per dataset, an F1 and a #Tokens column per
/// method. Methods are labelled by strategy, with the variant name appended
/// when the reports do not all share one variant.
std::string emit_merged_table(std::span<const EvalReport> reports);

}  // namespace em
