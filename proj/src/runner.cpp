#include "emreason/runner.hpp"

#include <cstdlib>
#include <fstream>

#include "emreason/pool.hpp"

namespace em {
namespace fs = std::filesystem;

namespace {

using ojson = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kMissingFile, "cannot write " + path.string());
  out << text;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal();
}

template <typename T>
T get_or(const nlohmann::json& node, const char* key, T fallback) {
  if (!node.is_object() || !node.contains(key) || node.at(key).is_null()) return fallback;
  return node.at(key).get<T>();
}

// Inputs shared by every pair of a run.
struct Prepared {
  DatasetBundle bundle;
  std::vector<RecordPair> pairs;
  std::vector<FewShotExample> shots;
  std::optional<PromptTemplates> owned_templates;
  PromptContext ctx;
};

std::unique_ptr<Prepared> prepare(const RunConfig& config) {
  auto p = std::make_unique<Prepared>();
  p->bundle = load_bundle(config.dataset_path, config.dataset_format, config.dataset_id);
  if (config.domain) p->bundle.domain = *config.domain;
  const auto& split = p->bundle.split(config.split);
  p->pairs = config.sample ? stratified_sample(split, *config.sample, config.seed)
                           : std::vector<RecordPair>(split.begin(), split.end());
  p->shots = sample_few_shot(p->bundle, config.variant.shots, config.seed, config.split);

  if (config.templates) p->owned_templates = PromptTemplates::from_file(*config.templates);
  p->ctx.templates = p->owned_templates ? &*p->owned_templates : &PromptTemplates::builtin();
  p->ctx.schema = p->bundle.schema;
  p->ctx.domain = p->bundle.domain;
  p->ctx.style = config.serialization;
  p->ctx.hint_min_phrase_tokens = config.hint_min_phrase_tokens;
  return p;
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHeuristic: return "heuristic";
    case BackendKind::kFixture: return "fixture";
    case BackendKind::kNetwork: return "network";
  }
  return "heuristic";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "heuristic") return BackendKind::kHeuristic;
  if (text == "fixture") return BackendKind::kFixture;
  if (text == "network") return BackendKind::kNetwork;
  throw Error(Errc::kConfigError, "unknown backend '" + std::string(text) + "'");
}

RunConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    const auto& dataset = j.at("dataset");
    c.dataset_path = resolve(base_dir, dataset.at("path").get<std::string>());
    c.dataset_format = parse_dataset_format(get_or<std::string>(dataset, "format", "deepmatcher"));
    if (dataset.contains("id") && !dataset.at("id").is_null()) c.dataset_id = dataset.at("id").get<std::string>();
    if (dataset.contains("domain") && !dataset.at("domain").is_null()) {
      c.domain = dataset.at("domain").get<std::string>();
    }
    c.split = parse_split(get_or<std::string>(dataset, "split", "test"));
    if (dataset.contains("sample") && !dataset.at("sample").is_null()) c.sample = dataset.at("sample").get<std::size_t>();

    c.strategy = parse_strategy(get_or<std::string>(j, "strategy", "baseline"));
    if (j.contains("variant")) c.variant = variant_from_json(j.at("variant"));
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);

    const nlohmann::json empty = nlohmann::json::object();
    const auto& prompts = j.contains("prompts") ? j.at("prompts") : empty;
    if (prompts.contains("templates") && !prompts.at("templates").is_null()) {
      c.templates = resolve(base_dir, prompts.at("templates").get<std::string>());
    }
    c.serialization = parse_serialization_style(get_or<std::string>(prompts, "serialization", "labeled-lines"));
    c.hint_min_phrase_tokens = get_or<std::size_t>(prompts, "hint_min_phrase_tokens", c.hint_min_phrase_tokens);

    const auto& decoding = j.contains("decoding") ? j.at("decoding") : empty;
    c.unparseable_default = parse_decision(get_or<std::string>(decoding, "unparseable_default", "no_match"));

    const auto& backend = j.contains("backend") ? j.at("backend") : empty;
    c.backend = parse_backend_kind(get_or<std::string>(backend, "kind", "heuristic"));
    if (backend.contains("fixture_file") && !backend.at("fixture_file").is_null()) {
      c.fixture_file = resolve(base_dir, backend.at("fixture_file").get<std::string>());
    }
    c.heuristic_threshold = get_or<double>(backend, "threshold", c.heuristic_threshold);
    c.network.base_url = get_or<std::string>(backend, "base_url", c.network.base_url);
    c.network.path = get_or<std::string>(backend, "path", c.network.path);
    c.network.send_temperature = get_or<bool>(backend, "send_temperature", c.network.send_temperature);
    c.network.timeout = std::chrono::seconds(get_or<std::int64_t>(backend, "timeout_s", c.network.timeout.count()));
    c.api_key_env = get_or<std::string>(backend, "api_key_env", c.api_key_env);

    const auto& model = j.contains("model") ? j.at("model") : empty;
    c.model.model = get_or<std::string>(model, "name", c.model.model);
    c.model.temperature = get_or<double>(model, "temperature", c.model.temperature);
    c.model.max_output_tokens = get_or<std::size_t>(model, "max_output_tokens", c.model.max_output_tokens);

    const auto& exec = j.contains("execution") ? j.at("execution") : empty;
    c.parallelism = get_or<std::size_t>(exec, "parallelism", c.parallelism);
    if (exec.contains("rate_limit") && !exec.at("rate_limit").is_null()) {
      const auto& rl = exec.at("rate_limit");
      c.rate_limit = RateLimit{rl.at("requests").get<std::size_t>(),
                               std::chrono::milliseconds(rl.at("interval_ms").get<std::int64_t>())};
    }
    c.retry.max_retries = get_or<std::size_t>(exec, "max_retries", c.retry.max_retries);
    c.retry.initial_delay =
        std::chrono::milliseconds(get_or<std::int64_t>(exec, "initial_backoff_ms", c.retry.initial_delay.count()));
    c.retry.max_delay = std::chrono::milliseconds(get_or<std::int64_t>(exec, "max_backoff_ms", c.retry.max_delay.count()));
    c.cache = get_or<bool>(exec, "cache", c.cache);
    if (exec.contains("cache_dir") && !exec.at("cache_dir").is_null()) {
      c.cache_dir = resolve(base_dir, exec.at("cache_dir").get<std::string>());
    }
    if (exec.contains("output_dir")) c.output_dir = resolve(base_dir, exec.at("output_dir").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, e.what());
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigError, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

ojson experiment_to_json(const RunConfig& c) {
  ojson j;
  j["dataset"] = {{"path", c.dataset_path.generic_string()},
                  {"format", to_string(c.dataset_format)},
                  {"id", c.dataset_id ? ojson(*c.dataset_id) : ojson(nullptr)},
                  {"domain", c.domain ? ojson(*c.domain) : ojson(nullptr)},
                  {"split", to_string(c.split)},
                  {"sample", c.sample ? ojson(*c.sample) : ojson(nullptr)}};
  j["strategy"] = to_string(c.strategy);
  j["variant"] = to_json(c.variant);
  j["seed"] = c.seed;
  j["prompts"] = {{"templates", c.templates ? ojson(c.templates->generic_string()) : ojson(nullptr)},
                  {"templates_version", c.templates ? ojson(nullptr) : ojson(PromptTemplates::builtin().version())},
                  {"serialization", to_string(c.serialization)},
                  {"hint_min_phrase_tokens", c.hint_min_phrase_tokens}};
  j["decoding"] = {{"unparseable_default", to_string(c.unparseable_default)}};
  ojson backend = {{"kind", to_string(c.backend)}};
  switch (c.backend) {
    case BackendKind::kHeuristic: backend["threshold"] = c.heuristic_threshold; break;
    case BackendKind::kFixture:
      backend["fixture_file"] = c.fixture_file ? ojson(c.fixture_file->generic_string()) : ojson(nullptr);
      break;
    case BackendKind::kNetwork:
      backend["base_url"] = c.network.base_url;
      backend["path"] = c.network.path;
      backend["send_temperature"] = c.network.send_temperature;
      break;
  }
  j["backend"] = std::move(backend);
  j["model"] = {{"name", c.model.model},
                {"temperature", c.model.temperature},
                {"max_output_tokens", c.model.max_output_tokens}};
  return j;
}

ojson execution_to_json(const RunConfig& c) {
  ojson j;
  j["parallelism"] = c.parallelism;
  j["rate_limit"] = c.rate_limit ? ojson{{"requests", c.rate_limit->requests},
                                         {"interval_ms", c.rate_limit->interval.count()}}
                                 : ojson(nullptr);
  j["max_retries"] = c.retry.max_retries;
  j["initial_backoff_ms"] = c.retry.initial_delay.count();
  j["max_backoff_ms"] = c.retry.max_delay.count();
  j["cache"] = c.cache;
  j["cache_dir"] = c.cache_dir ? ojson(c.cache_dir->generic_string()) : ojson(nullptr);
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

void validate_config(const RunConfig& c) {
  const auto fail = [](const std::string& message) { throw Error(Errc::kConfigError, message); };
  if (c.dataset_path.empty()) fail("dataset path is required");
  if (!fs::is_directory(c.dataset_path)) fail("dataset directory " + c.dataset_path.string() + " does not exist");
  if (c.templates && !fs::exists(*c.templates)) fail("template file " + c.templates->string() + " does not exist");
  if (c.parallelism == 0) fail("parallelism must be at least 1");
  if (c.model.temperature < 0) fail("temperature must be >= 0");
  if (c.rate_limit && (c.rate_limit->requests == 0 || c.rate_limit->interval.count() <= 0)) {
    fail("rate limit needs at least one request per positive interval");
  }
  switch (c.backend) {
    case BackendKind::kHeuristic: break;
    case BackendKind::kFixture:
      if (!c.fixture_file) fail("fixture backend needs a fixture file");
      if (!fs::exists(*c.fixture_file)) fail("fixture file " + c.fixture_file->string() + " does not exist");
      break;
    case BackendKind::kNetwork: {
      if (!c.live) fail("the network backend calls a paid API; pass --live to allow it");
      const char* key = std::getenv(c.api_key_env.c_str());
      if (key == nullptr || *key == '\0') fail("environment variable " + c.api_key_env + " holds no API key");
      break;
    }
  }
}

std::shared_ptr<Backend> make_backend(const RunConfig& c) {
  switch (c.backend) {
    case BackendKind::kHeuristic: return std::make_shared<HeuristicBackend>(c.heuristic_threshold);
    case BackendKind::kFixture: return std::make_shared<FixtureBackend>(FixtureBackend::from_file(*c.fixture_file));
    case BackendKind::kNetwork: {
      if (!c.live) throw Error(Errc::kConfigError, "the network backend requires --live");
      NetworkConfig network = c.network;
      const char* key = std::getenv(c.api_key_env.c_str());
      network.api_key = key != nullptr ? key : "";
      return std::make_shared<NetworkBackend>(network);
    }
  }
  throw Error(Errc::kConfigError, "unknown backend");
}

RunOutcome run_experiment(const RunConfig& config, std::shared_ptr<Backend> backend) {
  const auto prepared = prepare(config);
  const auto& pairs = prepared->pairs;
  if (!backend) backend = make_backend(config);

  GatewayOptions options;
  options.retry = config.retry;
  options.rate_limit = config.rate_limit;
  options.cache_enabled = config.cache;
  options.cache_dir = config.cache_dir;
  Gateway gateway(backend, options);

  std::vector<std::optional<Transcript>> transcripts(pairs.size());
  std::vector<std::optional<PairError>> failures(pairs.size());
  parallel_for(pairs.size(), config.parallelism, [&](std::size_t i) {
    try {
      transcripts[i] = run_strategy(config.strategy, pairs[i], config.variant, prepared->shots, gateway,
                                    prepared->ctx, config.model);
    } catch (const StepFailed& e) {
      failures[i] = PairError{pairs[i].pair_id, e.step(), e.code(), e.what()};
    } catch (const Error& e) {
      failures[i] = PairError{pairs[i].pair_id, std::nullopt, e.code(), e.what()};
    }
  });

  RunOutcome outcome;
  std::vector<Transcript> done;
  std::vector<MatchPrediction> predictions;
  std::vector<LabeledGold> golds;
  std::string transcripts_jsonl;
  std::string predictions_jsonl;
  std::string errors_jsonl;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (failures[i]) {
      const auto& f = *failures[i];
      ojson e = {{"pair_id", f.pair_id},
                 {"step", f.step ? ojson(to_string(*f.step)) : ojson(nullptr)},
                 {"code", errc_name(f.code)},
                 {"message", f.message}};
      errors_jsonl += e.dump() + '\n';
      outcome.errors.push_back(f);
      continue;
    }
    const auto& transcript = *transcripts[i];
    auto prediction = decide(transcript, config.variant.response_frame, config.unparseable_default);
    auto line = prediction_to_json(prediction);
    line["gold"] = pairs[i].gold ? ojson(pairs[i].gold->value) : ojson(nullptr);
    predictions_jsonl += line.dump() + '\n';
    transcripts_jsonl += transcript_to_json(transcript).dump() + '\n';
    golds.push_back({pairs[i].pair_id, pairs[i].gold.value_or(GoldLabel{0})});
    predictions.push_back(std::move(prediction));
    done.push_back(transcript);
  }

  outcome.report = build_report(prepared->bundle.schema.dataset_id(), config.strategy, config.variant, predictions,
                                golds, done, outcome.errors.size());
  outcome.gateway = gateway.stats();
  outcome.exit_code = outcome.errors.empty() ? 0 : 2;

  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "transcripts.jsonl", transcripts_jsonl);
  write_text(config.output_dir / "predictions.jsonl", predictions_jsonl);
  write_text(config.output_dir / "errors.jsonl", errors_jsonl);
  ojson report_doc;
  report_doc["report"] = report_to_json(outcome.report);
  report_doc["config"] = experiment_to_json(config);
  write_text(config.output_dir / "report.json", report_doc.dump(2) + '\n');
  write_text(config.output_dir / "report.csv", emit_report(outcome.report, ReportFormat::kCsv));
  write_text(config.output_dir / "report.txt", emit_report(outcome.report, ReportFormat::kTable));

  const auto s = outcome.gateway;
  ojson run;
  run["execution"] = execution_to_json(config);
  run["backend"] = gateway.backend_name();
  run["gateway"] = {{"requests", s.requests},     {"backend_calls", s.backend_calls}, {"cache_hits", s.cache_hits},
                    {"coalesced", s.coalesced},   {"retries", s.retries}};
  run["pairs"] = pairs.size();
  run["errors"] = outcome.errors.size();
  run["exit_code"] = outcome.exit_code;
  write_text(config.output_dir / "run.json", run.dump(2) + '\n');
  return outcome;
}

std::vector<PromptVariant> sweep_variants(const PromptVariant& base, const std::set<std::string>& axes,
                                          const std::vector<std::size_t>& shot_counts) {
  static const std::set<std::string> kAxes = {"task_frame", "verbiage", "response_frame", "shots", "hints"};
  if (axes.empty()) throw Error(Errc::kConfigError, "a sweep needs at least one axis");
  for (const auto& axis : axes) {
    if (!kAxes.contains(axis)) throw Error(Errc::kConfigError, "unknown sweep axis '" + axis + "'");
  }
  const bool sweep_shots = axes.contains("shots");
  if (sweep_shots && shot_counts.empty()) throw Error(Errc::kConfigError, "shots axis needs shot counts");
  const std::vector<std::size_t> shots = sweep_shots ? shot_counts : std::vector<std::size_t>{base.shots};

  std::vector<PromptVariant> out;
  for (const auto& v : enumerate_variants(shots)) {
    if (!axes.contains("task_frame") && v.task_frame != base.task_frame) continue;
    if (!axes.contains("verbiage") && v.verbiage != base.verbiage) continue;
    if (!axes.contains("response_frame") && v.response_frame != base.response_frame) continue;
    if (!axes.contains("hints") && v.hints != base.hints) continue;
    out.push_back(v);
  }
  return out;
}

SweepOutcome run_sweep(const RunConfig& base, const std::set<std::string>& axes,
                       const std::vector<std::size_t>& shot_counts, std::shared_ptr<Backend> backend) {
  SweepOutcome outcome;
  std::vector<EvalReport> reports;
  for (const auto& variant : sweep_variants(base.variant, axes, shot_counts)) {
    RunConfig config = base;
    config.variant = variant;
    config.output_dir = base.output_dir / variant.name();
    try {
      auto run = run_experiment(config, backend);
      outcome.exit_code = std::max(outcome.exit_code, run.exit_code);
      reports.push_back(run.report);
      outcome.runs.push_back(std::move(run));
    } catch (const Error& e) {
      // One variant failing (e.g. too few exemplars) must not stop the others.
      fs::create_directories(config.output_dir);
      write_text(config.output_dir / "error.txt", std::string(e.what()) + '\n');
      outcome.exit_code = 2;
    }
  }
  fs::create_directories(base.output_dir);
  write_text(base.output_dir / "comparison.csv", emit_reports_csv(reports));
  write_text(base.output_dir / "comparison.txt", emit_reports_table(reports));
  return outcome;
}

std::vector<EvalReport> load_reports(const std::vector<fs::path>& run_dirs) {
  std::vector<EvalReport> reports;
  for (const auto& dir : run_dirs) {
    const auto path = dir / "report.json";
    std::ifstream in(path);
    if (!in) throw Error(Errc::kMissingFile, path.string() + " not found");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kSchemaMismatch, path.string() + ": " + e.what());
    }
    reports.push_back(report_from_json(doc.contains("report") ? doc.at("report") : doc));
  }
  return reports;
}

CostEstimate estimate_cost(const RunConfig& config) {
  const auto prepared = prepare(config);
  CostEstimate estimate;
  estimate.pairs = prepared->pairs.size();
  const auto steps = step_sequence(config.strategy).size();
  estimate.requests = estimate.pairs * steps;
  for (const auto& pair : prepared->pairs) {
    const auto messages = render_baseline(prepared->ctx, pair, config.variant, prepared->shots);
    estimate.input_tokens += steps * count_whitespace_tokens(messages.text());
  }
  return estimate;
}

}  // namespace em
