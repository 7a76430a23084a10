#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emreason/backends.hpp"
#include "emreason/datasets.hpp"
#include "emreason/decoding.hpp"
#include "emreason/gateway.hpp"
#include "emreason/metrics.hpp"
#include "emreason/prompts.hpp"
#include "emreason/strategies.hpp"

namespace em {

enum class BackendKind { kHeuristic, kFixture, kNetwork };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

/// Everything that determines one experiment run.
struct RunConfig {
  // dataset
  std::filesystem::path dataset_path;
  DatasetFormat dataset_format = DatasetFormat::kDeepMatcher;
  std::optional<std::string> dataset_id;
  std::optional<std::string> domain;
  Split split = Split::kTest;
  std::optional<std::size_t> sample;  // stratified subsample of the split

  // method
  StrategyKind strategy = StrategyKind::kBaseline;
  PromptVariant variant;
  std::uint64_t seed = 42;
  std::optional<std::filesystem::path> templates;
  SerializationStyle serialization = SerializationStyle::kLabeledLines;
  std::size_t hint_min_phrase_tokens = 2;
  Decision unparseable_default = Decision::kNoMatch;

  // backend
  BackendKind backend = BackendKind::kHeuristic;
  std::optional<std::filesystem::path> fixture_file;
  double heuristic_threshold = 0.5;
  bool live = false;
  std::string api_key_env = "OPENAI_API_KEY";
  NetworkConfig network;  // api_key is filled from api_key_env at run time
  ModelSettings model;

  // execution (never affects results)
  std::size_t parallelism = 1;
  std::optional<RateLimit> rate_limit;
  RetryPolicy retry;
  bool cache = true;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path output_dir = "emreason-run";
};

/// Reads the JSON config layout described in the README. Relative paths are
/// resolved against `base_dir`. Throws Error(kConfigError).
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Resolved settings that determine results; embedded in every report.
nlohmann::ordered_json experiment_to_json(const RunConfig& config);
/// Settings that only change how the run executes.
nlohmann::ordered_json execution_to_json(const RunConfig& config);

/// Throws Error(kConfigError) naming the first problem.
void validate_config(const RunConfig& config);

/// Builds the configured backend. Network needs `live` and a key in the
/// environment.
std::shared_ptr<Backend> make_backend(const RunConfig& config);

struct PairError {
  std::string pair_id;
  std::optional<StepId> step;
  Errc code;
  std::string message;
};

struct RunOutcome {
  EvalReport report;
  std::vector<PairError> errors;
  GatewayStats gateway;
  int exit_code = 0;  // 0 success, 2 some pairs failed
};

/// Runs one experiment and writes into `config.output_dir`:
///   transcripts.jsonl, predictions.jsonl, errors.jsonl,
///   report.json ({"report": ..., "config": ...}), report.csv, report.txt,
///   run.json (execution settings and gateway counters).
/// `backend` overrides the configured one (tests wrap backends this way).
RunOutcome run_experiment(const RunConfig& config, std::shared_ptr<Backend> backend = nullptr);

/// The variants a sweep visits: every combination of the named axes
/// ("task_frame", "verbiage", "response_frame", "shots", "hints") with the
/// other axes held at `base`. `shot_counts` feeds the shots axis.
std::vector<PromptVariant> sweep_variants(const PromptVariant& base, const std::set<std::string>& axes,
                                          const std::vector<std::size_t>& shot_counts);

struct SweepOutcome {
  std::vector<RunOutcome> runs;
  int exit_code = 0;
};

/// One run per variant under `<output_dir>/<variant name>/`, plus
/// comparison.csv and comparison.txt in `output_dir`.
SweepOutcome run_sweep(const RunConfig& base, const std::set<std::string>& axes,
                       const std::vector<std::size_t>& shot_counts, std::shared_ptr<Backend> backend = nullptr);

/// Loads `<dir>/report.json` from each run directory.
std::vector<EvalReport> load_reports(const std::vector<std::filesystem::path>& run_dirs);

/// Approximate request and input-token volume of a run, for the cost notice
/// printed before live runs.
struct CostEstimate {
  std::size_t pairs = 0;
  std::size_t requests = 0;
  std::uint64_t input_tokens = 0;  // whitespace tokens of the first prompt of each pair, times steps
};
CostEstimate estimate_cost(const RunConfig& config);

}  // namespace em
