#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emreason/runner.hpp"

namespace {

constexpr int kExitConfig = 1;

// Flags that override fields of the config file. Unset options leave the
// file's value alone.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> dataset;
  std::optional<std::string> format;
  std::optional<std::string> dataset_id;
  std::optional<std::string> domain;
  std::optional<std::string> split;
  std::optional<std::size_t> sample;
  std::optional<std::string> strategy;
  std::optional<std::string> task_frame;
  std::optional<std::string> verbiage;
  std::optional<std::string> response_frame;
  std::optional<std::size_t> shots;
  std::optional<bool> hints;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> templates;
  std::optional<std::string> serialization;
  std::optional<std::string> backend;
  std::optional<std::string> fixture;
  std::optional<double> threshold;
  std::optional<std::string> model;
  std::optional<std::string> base_url;
  std::optional<std::string> api_key_env;
  std::optional<std::size_t> parallelism;
  std::optional<std::size_t> rate_requests;
  std::optional<std::int64_t> rate_interval_ms;
  std::optional<std::size_t> max_retries;
  std::optional<std::string> cache_dir;
  bool no_cache = false;
  std::optional<std::string> output;
  std::optional<std::string> unparseable_default;
  bool live = false;
  bool yes = false;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON config file");
  cmd->add_option("--dataset", o.dataset, "Dataset directory");
  cmd->add_option("--format", o.format, "deepmatcher or wdc-pairs");
  cmd->add_option("--dataset-id", o.dataset_id, "Dataset id used in reports");
  cmd->add_option("--domain", o.domain, "Domain for domain-specific prompts");
  cmd->add_option("--split", o.split, "train, valid or test");
  cmd->add_option("--sample", o.sample, "Stratified subsample size");
  cmd->add_option("--strategy", o.strategy, "baseline, cot_single, cot_multi or debate");
  cmd->add_option("--task-frame", o.task_frame, "general or domain_specific");
  cmd->add_option("--verbiage", o.verbiage, "simple or complex");
  cmd->add_option("--response-frame", o.response_frame, "free or forced");
  cmd->add_option("--shots", o.shots, "Few-shot examples per decision prompt");
  cmd->add_flag("--hints,!--no-hints", o.hints, "Include lexical hints");
  cmd->add_option("--seed", o.seed, "Sampling seed");
  cmd->add_option("--templates", o.templates, "Prompt template file");
  cmd->add_option("--serialization", o.serialization, "labeled-lines or col-val");
  cmd->add_option("--backend", o.backend, "heuristic, fixture or network");
  cmd->add_option("--fixture", o.fixture, "Fixture response file");
  cmd->add_option("--threshold", o.threshold, "Heuristic backend threshold");
  cmd->add_option("--model", o.model, "Model name");
  cmd->add_option("--base-url", o.base_url, "Network backend base URL");
  cmd->add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key");
  cmd->add_option("-j,--parallelism", o.parallelism, "Concurrent requests");
  cmd->add_option("--rate-requests", o.rate_requests, "Requests allowed per rate interval");
  cmd->add_option("--rate-interval-ms", o.rate_interval_ms, "Rate interval in milliseconds");
  cmd->add_option("--max-retries", o.max_retries, "Retries per request");
  cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory");
  cmd->add_flag("--no-cache", o.no_cache, "Disable the response cache");
  cmd->add_option("-o,--output", o.output, "Output directory");
  cmd->add_option("--unparseable-default", o.unparseable_default, "match or no_match");
  cmd->add_flag("--live", o.live, "Allow calls to a paid API");
  cmd->add_flag("-y,--yes", o.yes, "Skip the cost confirmation for live runs");
}

em::RunConfig resolve(const Overrides& o) {
  em::RunConfig c;
  if (o.config) c = em::load_config(*o.config);
  try {
    if (o.dataset) c.dataset_path = *o.dataset;
    if (o.format) c.dataset_format = em::parse_dataset_format(*o.format);
    if (o.dataset_id) c.dataset_id = *o.dataset_id;
    if (o.domain) c.domain = *o.domain;
    if (o.split) c.split = em::parse_split(*o.split);
    if (o.sample) c.sample = *o.sample;
    if (o.strategy) c.strategy = em::parse_strategy(*o.strategy);
    if (o.task_frame) c.variant.task_frame = em::parse_task_frame(*o.task_frame);
    if (o.verbiage) c.variant.verbiage = em::parse_verbiage(*o.verbiage);
    if (o.response_frame) c.variant.response_frame = em::parse_response_frame(*o.response_frame);
    if (o.shots) c.variant.shots = *o.shots;
    if (o.hints) c.variant.hints = *o.hints;
    if (o.seed) c.seed = *o.seed;
    if (o.templates) c.templates = *o.templates;
    if (o.serialization) c.serialization = em::parse_serialization_style(*o.serialization);
    if (o.backend) c.backend = em::parse_backend_kind(*o.backend);
    if (o.fixture) c.fixture_file = *o.fixture;
    if (o.threshold) c.heuristic_threshold = *o.threshold;
    if (o.model) c.model.model = *o.model;
    if (o.base_url) c.network.base_url = *o.base_url;
    if (o.api_key_env) c.api_key_env = *o.api_key_env;
    if (o.parallelism) c.parallelism = *o.parallelism;
    if (o.rate_requests || o.rate_interval_ms) {
      c.rate_limit = em::RateLimit{o.rate_requests.value_or(1),
                                   std::chrono::milliseconds(o.rate_interval_ms.value_or(1000))};
    }
    if (o.max_retries) c.retry.max_retries = *o.max_retries;
    if (o.cache_dir) c.cache_dir = *o.cache_dir;
    if (o.no_cache) c.cache = false;
    if (o.output) c.output_dir = *o.output;
    if (o.unparseable_default) c.unparseable_default = em::parse_decision(*o.unparseable_default);
  } catch (const em::Error& e) {
    throw em::Error(em::Errc::kConfigError, e.what());
  }
  c.live = o.live;
  em::validate_config(c);
  return c;
}

bool confirm_live(const em::RunConfig& config, std::size_t variants, bool yes) {
  if (config.backend != em::BackendKind::kNetwork) return true;
  const auto estimate = em::estimate_cost(config);
  std::cerr << "live run against " << config.network.base_url << " with model " << config.model.model << ": "
            << variants * estimate.pairs << " pairs, about " << variants * estimate.requests << " requests and "
            << variants * estimate.input_tokens << " input tokens before caching\n";
  if (yes) return true;
  std::cerr << "continue? [y/N] ";
  std::string answer;
  std::getline(std::cin, answer);
  return answer == "y" || answer == "Y" || answer == "yes";
}

void print_summary(const em::RunOutcome& run) {
  std::cout << em::emit_report(run.report, em::ReportFormat::kTable);
  for (const auto& e : run.errors) {
    std::cerr << "pair " << e.pair_id << " failed: " << e.message << '\n';
  }
  std::cerr << "requests " << run.gateway.requests << ", backend calls " << run.gateway.backend_calls
            << ", cache hits " << run.gateway.cache_hits << ", retries " << run.gateway.retries << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity matching experiments with prompted language models"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_run_options(run, run_opts);

  Overrides sweep_opts;
  std::string axes_text;
  std::string shots_text = "0,2";
  auto* sweep = app.add_subcommand("sweep", "Run every prompt variant along the chosen axes");
  add_run_options(sweep, sweep_opts);
  sweep->add_option("--axes", axes_text, "Comma list of task_frame, verbiage, response_frame, shots, hints")
      ->required();
  sweep->add_option("--shot-counts", shots_text, "Comma list of shot counts for the shots axis");

  std::vector<std::string> report_dirs;
  std::string report_format = "table";
  auto* report = app.add_subcommand("report", "Merge reports from run directories");
  report->add_option("dirs", report_dirs, "Run directories");
  report->add_option("--format", report_format, "table, csv or json");

  auto* cache = app.add_subcommand("cache", "Manage the response cache");
  cache->require_subcommand(1);
  std::string purge_dir;
  auto* purge = cache->add_subcommand("purge", "Delete every cached response");
  purge->add_option("--cache-dir", purge_dir, "Cache directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const auto config = resolve(run_opts);
      if (!confirm_live(config, 1, run_opts.yes)) return kExitConfig;
      const auto outcome = em::run_experiment(config);
      print_summary(outcome);
      return outcome.exit_code;
    }
    if (*sweep) {
      const auto config = resolve(sweep_opts);
      const auto axes_list = split_list(axes_text);
      const std::set<std::string> axes(axes_list.begin(), axes_list.end());
      std::vector<std::size_t> shot_counts;
      for (const auto& item : split_list(shots_text)) shot_counts.push_back(std::stoul(item));
      const auto variants = em::sweep_variants(config.variant, axes, shot_counts);
      if (!confirm_live(config, variants.size(), sweep_opts.yes)) return kExitConfig;
      const auto outcome = em::run_sweep(config, axes, shot_counts);
      std::ifstream table(config.output_dir / "comparison.txt");
      std::cout << table.rdbuf();
      return outcome.exit_code;
    }
    if (*report) {
      if (report_dirs.empty()) {
        std::cerr << "report: at least one run directory is required\n" << report->help();
        return kExitConfig;
      }
      std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
      const auto reports = em::load_reports(dirs);
      switch (em::parse_report_format(report_format)) {
        case em::ReportFormat::kTable: std::cout << em::emit_merged_table(reports); break;
        case em::ReportFormat::kCsv: std::cout << em::emit_reports_csv(reports); break;
        case em::ReportFormat::kJson: {
          auto out = nlohmann::ordered_json::array();
          for (const auto& r : reports) out.push_back(em::report_to_json(r));
          std::cout << out.dump(2) << '\n';
          break;
        }
      }
      return 0;
    }
    if (*purge) {
      em::ResponseCache store{std::filesystem::path(purge_dir)};
      std::cout << "removed " << store.purge() << " cached responses\n";
      return 0;
    }
  } catch (const em::Error& e) {
    std::cerr << "emreason: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "emreason: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
