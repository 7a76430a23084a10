#include "emreason/metrics.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

namespace em {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::string> csv_header() {
  return {"dataset",    "strategy",  "variant",          "task_frame",  "verbiage",     "response_frame",
          "shots",      "hints",     "n_pairs",          "tp",          "fp",           "tn",
          "fn",         "precision", "recall",           "f1",          "input_tokens", "output_tokens",
          "mean_tokens_per_pair",    "unparseable_rate", "n_errors"};
}

std::vector<std::string> csv_row(const EvalReport& r) {
  return {r.dataset_id,
          r.strategy,
          r.variant.name(),
          std::string(to_string(r.variant.task_frame)),
          std::string(to_string(r.variant.verbiage)),
          std::string(to_string(r.variant.response_frame)),
          std::to_string(r.variant.shots),
          r.variant.hints ? "on" : "off",
          std::to_string(r.n_pairs),
          std::to_string(r.counts.tp),
          std::to_string(r.counts.fp),
          std::to_string(r.counts.tn),
          std::to_string(r.counts.fn),
          fmt::format("{:.6f}", r.precision),
          fmt::format("{:.6f}", r.recall),
          fmt::format("{:.6f}", r.f1),
          std::to_string(r.token_total.input_tokens),
          std::to_string(r.token_total.output_tokens),
          fmt::format("{:.3f}", r.token_mean_per_pair),
          fmt::format("{:.6f}", r.unparseable_rate),
          std::to_string(r.n_errors)};
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out += ',';
    out += cells[i];
  }
  return out;
}

// Left-aligned text grid with a dashed rule under the header.
std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c > 0) line += "  ";
      line += fmt::format("{:<{}}", rows[r][c], widths[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w;
      out += std::string(total + 2 * (widths.size() - 1), '-') + '\n';
    }
  }
  return out;
}

}  // namespace

ConfusionCounts confusion(std::span<const MatchPrediction> predictions, std::span<const LabeledGold> golds) {
  if (predictions.size() != golds.size()) {
    throw Error(Errc::kLengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                           std::to_string(golds.size()) + " gold labels");
  }
  std::unordered_map<std::string_view, GoldLabel> by_id;
  for (const auto& g : golds) by_id.emplace(g.pair_id, g.label);

  ConfusionCounts counts;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.pair_id);
    if (it == by_id.end()) throw Error(Errc::kUnknownPairId, "no gold label for pair '" + p.pair_id + "'");
    const bool predicted = p.decision == Decision::kMatch;
    const bool actual = it->second.is_match();
    if (predicted && actual) ++counts.tp;
    if (predicted && !actual) ++counts.fp;
    if (!predicted && !actual) ++counts.tn;
    if (!predicted && actual) ++counts.fn;
  }
  return counts;
}

Scores score(const ConfusionCounts& c) {
  Scores s;
  s.degenerate = c.tp + c.fp + c.fn == 0;
  if (c.tp == 0) return s;
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.recall = ratio(c.tp, c.tp + c.fn);
  s.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return s;
}

double f1(const ConfusionCounts& counts) { return score(counts).f1; }

TokenReport token_report(std::span<const Transcript> transcripts) {
  TokenReport report;
  report.n_pairs = transcripts.size();
  for (const auto& t : transcripts) report.total += t.total_usage;
  if (report.n_pairs > 0) {
    const std::uint64_t sum = report.total.total();
    const std::uint64_t n = report.n_pairs;
    report.mean_per_pair = static_cast<double>(sum) / static_cast<double>(n);
    report.mean_per_pair_rounded = (2 * sum + n) / (2 * n);
  }
  return report;
}

EvalReport build_report(std::string dataset_id, StrategyKind strategy, const PromptVariant& variant,
                        std::span<const MatchPrediction> predictions, std::span<const LabeledGold> golds,
                        std::span<const Transcript> transcripts, std::size_t n_errors) {
  std::vector<MatchPrediction> sorted_predictions(predictions.begin(), predictions.end());
  std::sort(sorted_predictions.begin(), sorted_predictions.end(),
            [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });
  std::vector<Transcript> sorted_transcripts(transcripts.begin(), transcripts.end());
  std::sort(sorted_transcripts.begin(), sorted_transcripts.end(),
            [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });

  EvalReport report;
  report.dataset_id = std::move(dataset_id);
  report.strategy = std::string(to_string(strategy));
  report.variant = variant;
  report.counts = confusion(sorted_predictions, golds);
  const auto s = score(report.counts);
  report.precision = s.precision;
  report.recall = s.recall;
  report.f1 = s.f1;
  report.degenerate_split = s.degenerate;

  const auto tokens = token_report(sorted_transcripts);
  report.token_total = tokens.total;
  report.token_mean_per_pair = tokens.mean_per_pair;
  report.token_mean_per_pair_rounded = tokens.mean_per_pair_rounded;

  report.n_pairs = sorted_predictions.size();
  report.n_unparseable = static_cast<std::size_t>(
      std::count_if(sorted_predictions.begin(), sorted_predictions.end(),
                    [](const auto& p) { return p.status == ParseStatus::kUnparseableDefaulted; }));
  report.unparseable_rate = ratio(report.n_unparseable, report.n_pairs);
  report.n_errors = n_errors;
  return report;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::kJson;
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "table") return ReportFormat::kTable;
  throw Error(Errc::kUnsupportedFormat, "unsupported report format '" + std::string(text) + "'");
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = r.schema_version;
  j["dataset_id"] = r.dataset_id;
  j["strategy"] = r.strategy;
  j["variant"] = to_json(r.variant);
  j["n_pairs"] = r.n_pairs;
  j["n_errors"] = r.n_errors;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}};
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["degenerate_split"] = r.degenerate_split;
  j["token_total"] = usage_to_json(r.token_total);
  j["token_mean_per_pair"] = r.token_mean_per_pair;
  j["token_mean_per_pair_rounded"] = r.token_mean_per_pair_rounded;
  j["n_unparseable"] = r.n_unparseable;
  j["unparseable_rate"] = r.unparseable_rate;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  const auto version = j.value("schema_version", std::string{});
  if (version != kReportSchemaVersion) {
    throw Error(Errc::kSchemaMismatch,
                "report schema '" + version + "' is not '" + std::string(kReportSchemaVersion) + "'");
  }
  EvalReport r;
  r.schema_version = version;
  r.dataset_id = j.at("dataset_id").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.variant = variant_from_json(j.at("variant"));
  r.n_pairs = j.at("n_pairs").get<std::size_t>();
  r.n_errors = j.at("n_errors").get<std::size_t>();
  const auto& c = j.at("counts");
  r.counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
              c.at("fn").get<std::size_t>()};
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.degenerate_split = j.at("degenerate_split").get<bool>();
  r.token_total = usage_from_json(j.at("token_total"));
  r.token_mean_per_pair = j.at("token_mean_per_pair").get<double>();
  r.token_mean_per_pair_rounded = j.at("token_mean_per_pair_rounded").get<std::uint64_t>();
  r.n_unparseable = j.at("n_unparseable").get<std::size_t>();
  r.unparseable_rate = j.at("unparseable_rate").get<double>();
  return r;
}

std::string emit_reports_csv(std::span<const EvalReport> reports) {
  std::string out = join_csv(csv_header()) + '\n';
  for (const auto& r : reports) out += join_csv(csv_row(r)) + '\n';
  return out;
}

std::string emit_reports_table(std::span<const EvalReport> reports) {
  std::vector<std::vector<std::string>> rows = {
      {"Dataset", "Strategy", "Variant", "F1", "#Tokens", "Precision", "Recall", "Pairs", "Unparseable", "Errors"}};
  for (const auto& r : reports) {
    rows.push_back({r.dataset_id, r.strategy, r.variant.name(), fmt::format("{:.3f}", r.f1),
                    std::to_string(r.token_mean_per_pair_rounded), fmt::format("{:.3f}", r.precision),
                    fmt::format("{:.3f}", r.recall), std::to_string(r.n_pairs),
                    fmt::format("{:.3f}", r.unparseable_rate), std::to_string(r.n_errors)});
  }
  return render_grid(rows);
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_to_json(report).dump(2) + '\n';
    case ReportFormat::kCsv: return emit_reports_csv(std::span(&report, 1));
    case ReportFormat::kTable: return emit_reports_table(std::span(&report, 1));
  }
  throw Error(Errc::kUnsupportedFormat, "unsupported report format");
}

std::string emit_merged_table(std::span<const EvalReport> reports) {
  const bool one_variant = std::all_of(reports.begin(), reports.end(),
                                       [&](const auto& r) { return r.variant == reports.front().variant; });
  const auto label = [&](const EvalReport& r) {
    return one_variant ? r.strategy : r.strategy + " [" + r.variant.name() + "]";
  };

  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::map<std::pair<std::string, std::string>, const EvalReport*> cells;
  for (const auto& r : reports) {
    const auto method = label(r);
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
    if (std::find(datasets.begin(), datasets.end(), r.dataset_id) == datasets.end()) datasets.push_back(r.dataset_id);
    cells[{r.dataset_id, method}] = &r;
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Dataset"};
  for (const auto& m : methods) {
    header.push_back(m + " F1");
    header.push_back(m + " #Tokens");
  }
  rows.push_back(std::move(header));
  for (const auto& d : datasets) {
    std::vector<std::string> row{d};
    for (const auto& m : methods) {
      auto it = cells.find({d, m});
      if (it == cells.end()) {
        row.insert(row.end(), {"-", "-"});
      } else {
        row.push_back(fmt::format("{:.3f}", it->second->f1));
        row.push_back(std::to_string(it->second->token_mean_per_pair_rounded));
      }
    }
    rows.push_back(std::move(row));
  }
  return render_grid(rows);
}

}  // namespace em
