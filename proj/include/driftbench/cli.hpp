#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftbench/backend.hpp"
#include "driftbench/dataset.hpp"
#include "driftbench/error.hpp"
#include "driftbench/mock_backends.hpp"
#include "driftbench/orchestrator.hpp"
#include "driftbench/records.hpp"
#include "driftbench/remote_backend.hpp"
#include "driftbench/report.hpp"
#include "driftbench/version.hpp"

namespace driftbench {

namespace cli {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct BackendOptions {
  std::string backend = "drift-mock";
  std::string model;
  std::string base_url;
  double temperature = 1.0;
  int max_tokens = 64;
  int entropy_top_k = 10;
  std::int64_t timeout_ms = 30'000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mock_config;
};

inline void add_backend_flags(CLI::App& cmd, BackendOptions& opts) {
  cmd.add_option("--backend", opts.backend, "Backend kind")
      ->check(CLI::IsMember({"remote", "scripted-mock", "drift-mock"}))
      ->capture_default_str();
  cmd.add_option("--model", opts.model, "Model name sent to the backend");
  cmd.add_option("--base-url", opts.base_url,
                 "Base URL of an OpenAI-compatible endpoint (remote backend)");
  cmd.add_option("--temperature", opts.temperature, "Sampling temperature")
      ->capture_default_str();
  cmd.add_option("--max-tokens", opts.max_tokens, "Answer token cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--entropy-top-k", opts.entropy_top_k,
                 "Top candidates requested per token position")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--timeout-ms", opts.timeout_ms, "Per-request timeout in milliseconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--seed", opts.seed, "Master seed for deterministic mock backends")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd.add_option("--mock-config", opts.mock_config,
                 "JSON spec file for scripted-mock or drift-mock behavior")
      ->check(CLI::ExistingFile);
}

inline ModelSpec model_spec_from(const BackendOptions& opts) {
  ModelSpec spec;
  if (opts.backend == "remote") {
    spec.kind = BackendKind::RemoteHttp;
  } else if (opts.backend == "scripted-mock") {
    spec.kind = BackendKind::ScriptedMock;
  } else {
    spec.kind = BackendKind::DriftMock;
  }
  spec.model_name = opts.model.empty() ? opts.backend : opts.model;
  spec.base_url = opts.base_url;
  spec.temperature = opts.temperature;
  spec.top_logprobs_requested = opts.entropy_top_k;
  spec.max_answer_tokens = opts.max_tokens;
  spec.request_timeout = std::chrono::milliseconds(opts.timeout_ms);
  if (opts.seed_set) {
    spec.seed = opts.seed;
  }
  return spec;
}

inline std::unique_ptr<Backend> make_backend(const BackendOptions& opts,
                                             std::span<const QAItem> corpus) {
  const ModelSpec spec = model_spec_from(opts);
  switch (spec.kind) {
    case BackendKind::RemoteHttp: {
      if (spec.base_url.empty()) {
        throw UsageError("--base-url is required with --backend remote");
      }
      if (api_key_from_env().empty()) {
        std::cerr << "warning: " << kApiKeyEnvVar
                  << " is not set; sending unauthenticated requests\n";
      }
      return std::make_unique<RemoteHttpBackend>(spec);
    }
    case BackendKind::ScriptedMock: {
      if (opts.mock_config.empty()) {
        throw UsageError("--mock-config is required with --backend scripted-mock");
      }
      return std::make_unique<ScriptedMockBackend>(spec,
                                                   load_scripted_spec(opts.mock_config));
    }
    case BackendKind::DriftMock: {
      DriftMockSpec drift = opts.mock_config.empty()
                                ? default_drift_spec(opts.seed)
                                : load_drift_spec(opts.mock_config);
      if (opts.seed_set) {
        drift.seed = opts.seed;
      }
      return std::make_unique<DriftMockBackend>(spec, drift, corpus);
    }
  }
  throw UsageError("unknown backend");
}

// ---- validate -------------------------------------------------------------

inline int run_validate(const std::string& dataset_path) {
  std::ifstream in(dataset_path);
  if (!in) {
    std::cerr << "error: cannot open dataset file: " << dataset_path << "\n";
    return kExitFailure;
  }
  std::vector<QAItem> items;
  try {
    items = parse_corpus(in);
  } catch (const ParseError& ex) {
    std::cerr << dataset_path << ": " << ex.what() << "\n";
    return kExitFailure;
  }
  const std::vector<ValidationIssue> issues = validate_corpus(items);
  if (issues.empty()) {
    std::cout << dataset_path << ": " << items.size() << " items, no issues\n";
    return kExitOk;
  }
  for (const ValidationIssue& issue : issues) {
    std::cout << dataset_path << ": [" << issue.item_id << "] " << issue.code << ": "
              << issue.message << "\n";
  }
  std::cout << issues.size() << " issue(s) found\n";
  return kExitFailure;
}

// ---- prepare --------------------------------------------------------------

inline int run_prepare(const std::string& dataset_path, const BackendOptions& backend_opts,
                       Variant variant, const std::string& out_path, int concurrency,
                       const RetryPolicy& retry) {
  const std::vector<QAItem> corpus = load_corpus(dataset_path);
  std::unique_ptr<Backend> backend = make_backend(backend_opts, corpus);
  const BaselineReport report =
      identify_baseline(corpus, *backend, variant, retry, concurrency);

  std::cout << "| Model | Accuracy | Eligible |\n|---|---|---|\n";
  char acc[16];
  std::snprintf(acc, sizeof(acc), "%.3f", report.accuracy);
  std::cout << "| " << backend->spec().model_name << " | " << acc << " | "
            << report.eligible_ids.size() << "/" << report.corpus_size << " |\n";
  if (!report.failed_ids.empty()) {
    std::cout << report.failed_ids.size() << " item(s) failed after retries\n";
  }

  if (!out_path.empty()) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["model"] = backend->spec().model_name;
    doc["backend"] = backend_kind_name(backend->spec().kind);
    doc["variant"] = variant_name(variant);
    doc["corpus_sha256"] = file_sha256(dataset_path);
    doc["corpus_size"] = report.corpus_size;
    doc["accuracy"] = report.accuracy;
    doc["eligible_ids"] = report.eligible_ids;
    doc["failed_ids"] = report.failed_ids;
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitFailure;
    }
    out << doc.dump(2) << "\n";
    std::cout << "eligible list written to " << out_path << "\n";
  }
  return kExitOk;
}

// ---- run ------------------------------------------------------------------

inline std::vector<QAItem> filter_eligible(std::vector<QAItem> corpus,
                                           const std::string& eligible_path) {
  if (eligible_path.empty()) {
    return corpus;
  }
  std::ifstream in(eligible_path);
  if (!in) {
    throw IoError("cannot open eligible list: " + eligible_path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("eligible list: " + std::string(ex.what()));
  }
  std::vector<std::string> ids;
  if (doc.is_array()) {
    ids = doc.get<std::vector<std::string>>();
  } else if (doc.contains("eligible_ids")) {
    ids = doc.at("eligible_ids").get<std::vector<std::string>>();
  } else {
    throw ParseError("eligible list: expected an array or an object with eligible_ids");
  }
  std::unordered_map<std::string, bool> wanted;
  for (const std::string& id : ids) {
    wanted[id] = true;
  }
  std::vector<QAItem> filtered;
  for (QAItem& item : corpus) {
    if (wanted.contains(item.id)) {
      filtered.push_back(std::move(item));
    }
  }
  return filtered;
}

inline int run_run(const std::string& dataset_path, const BackendOptions& backend_opts,
                   const std::string& conditions_csv, Variant variant, int runs,
                   const std::string& out_path, const std::string& eligible_path,
                   int concurrency, const RetryPolicy& retry, bool timestamps,
                   std::optional<std::size_t> limit) {
  std::vector<QAItem> corpus = load_corpus(dataset_path);
  const std::string corpus_hash = file_sha256(dataset_path);
  std::vector<QAItem> eligible = filter_eligible(std::move(corpus), eligible_path);
  if (eligible.empty()) {
    std::cerr << "error: no eligible items to run\n";
    return kExitFailure;
  }
  std::unique_ptr<Backend> backend = make_backend(backend_opts, eligible);

  RunConfig config;
  config.corpus_path = dataset_path;
  config.corpus_sha256 = corpus_hash;
  config.conditions = parse_condition_list(conditions_csv, variant);
  config.runs_per_condition = runs;
  config.entropy_top_k = backend_opts.entropy_top_k;
  config.concurrency_limit = concurrency;
  config.retry = retry;
  config.output_path = out_path;
  config.master_seed = backend_opts.seed;
  config.record_timestamps = timestamps;
  config.limit = limit;

  const RunResult result = run_experiment(config, eligible, *backend);
  std::cout << "records: " << result.records.size() << " (" << result.issued
            << " generated, " << result.cached << " cached";
  if (result.skipped > 0) {
    std::cout << ", " << result.skipped << " deferred by --limit";
  }
  std::cout << ")\n";
  if (result.failures > 0) {
    std::cout << result.failures << " generation(s) failed after retries\n";
  }
  std::cout << "record file: " << out_path << "\n";
  return kExitOk;
}

// ---- report ---------------------------------------------------------------

inline int run_report(const std::string& in_path, const std::string& format,
                      const std::string& out_path, int metric_precision,
                      int accuracy_precision) {
  const RecordFile file = read_record_file(in_path);
  if (file.records.empty()) {
    std::cerr << "error: " << in_path << " contains no records\n";
    return kExitFailure;
  }
  Summary summary = summarize(file.records);
  if (summary.model.empty()) {
    summary.model = file.header.model;
  }
  ReportSpec spec;
  spec.format = parse_output_format(format);
  spec.metric_precision = metric_precision;
  spec.accuracy_precision = accuracy_precision;
  const std::string rendered = emit_table(summary, spec);
  if (out_path.empty()) {
    std::cout << rendered;
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitFailure;
    }
    out << rendered;
    std::cout << "report written to " << out_path << "\n";
  }
  return kExitOk;
}

}  // namespace cli

// Top-level command dispatch; returns the process exit code.
inline int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"driftbench: measures knowledge drift in QA models under "
               "misinformation injection"};
  app.set_version_flag("--version", std::string(kDriftbenchVersion));
  app.require_subcommand(1);
  app.set_config("--config", "", "Read default flag values from a config file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::string dataset_path;
  std::string out_path;
  std::string in_path;
  std::string eligible_path;
  std::string conditions_csv = "b,rip,fip:1,fip:2,fip:5,fip:10";
  std::string variant_str = "v1";
  std::string format = "md";
  int runs = 10;
  int concurrency = 4;
  int retries = 3;
  std::int64_t retry_base_ms = 250;
  bool no_timestamps = false;
  std::optional<std::size_t> limit;
  int metric_precision = 2;
  int accuracy_precision = 3;
  cli::BackendOptions backend_opts;

  CLI::App* validate = app.add_subcommand("validate", "Lint a QA corpus file");
  validate->add_option("--dataset", dataset_path, "Corpus JSONL file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* prepare =
      app.add_subcommand("prepare", "Identify the items the model answers correctly");
  prepare->add_option("--dataset", dataset_path, "Corpus JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  cli::add_backend_flags(*prepare, backend_opts);
  prepare->add_option("--variant", variant_str, "Instruction variant (v1 or v2)")
      ->check(CLI::IsMember({"v1", "v2"}))
      ->capture_default_str();
  prepare->add_option("--out", out_path, "Where to write the eligible-id list (JSON)");
  prepare->add_option("--concurrency", concurrency, "Max in-flight generations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  prepare->add_option("--retries", retries, "Max attempts per request")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  prepare->add_option("--retry-base-ms", retry_base_ms, "Initial retry backoff")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CLI::App* run = app.add_subcommand("run", "Execute a condition sweep");
  run->add_option("--dataset", dataset_path, "Corpus JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  cli::add_backend_flags(*run, backend_opts);
  run->add_option("--conditions", conditions_csv,
                  "Comma list of conditions: b | fip:k | rip")
      ->capture_default_str();
  run->add_option("--variant", variant_str, "Instruction variant (v1 or v2)")
      ->check(CLI::IsMember({"v1", "v2"}))
      ->capture_default_str();
  run->add_option("--runs", runs, "Runs per condition")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--out", out_path, "Record file to write (JSONL, resumable)")
      ->required();
  run->add_option("--eligible", eligible_path,
                  "Eligible-id list from `prepare`; defaults to the whole corpus")
      ->check(CLI::ExistingFile);
  run->add_option("--concurrency", concurrency, "Max in-flight generations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--retries", retries, "Max attempts per request")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--retry-base-ms", retry_base_ms, "Initial retry backoff")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_flag("--no-timestamps", no_timestamps,
                "Omit wall-clock fields for bit-reproducible record files");
  run->add_option("--limit", limit, "Stop after issuing N new generations")
      ->check(CLI::PositiveNumber);

  CLI::App* report = app.add_subcommand("report", "Render tables or plot data");
  report->add_option("--in", in_path, "Record file produced by `run`")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--format", format, "Output format: md, csv, or plot")
      ->check(CLI::IsMember({"md", "markdown", "csv", "plot"}))
      ->capture_default_str();
  report->add_option("--out", out_path, "Write output here instead of stdout");
  report->add_option("--metric-precision", metric_precision,
                     "Decimal places for metric means")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  report->add_option("--accuracy-precision", accuracy_precision,
                     "Decimal places for accuracies and standard errors")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    RetryPolicy retry;
    retry.max_attempts = retries;
    retry.base_delay = std::chrono::milliseconds(retry_base_ms);
    const Variant variant = parse_variant(variant_str);
    if (validate->parsed()) {
      return cli::run_validate(dataset_path);
    }
    if (prepare->parsed()) {
      return cli::run_prepare(dataset_path, backend_opts, variant, out_path, concurrency,
                              retry);
    }
    if (run->parsed()) {
      return cli::run_run(dataset_path, backend_opts, conditions_csv, variant, runs,
                          out_path, eligible_path, concurrency, retry, !no_timestamps,
                          limit);
    }
    if (report->parsed()) {
      return cli::run_report(in_path, format, out_path, metric_precision,
                             accuracy_precision);
    }
    std::cerr << "error: no subcommand given\n";
    return cli::kExitUsage;
  } catch (const UsageError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return cli::kExitUsage;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return cli::kExitFailure;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return cli::kExitFailure;
  }
}

inline int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& arg : args) {
    argv.push_back(arg.c_str());
  }
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace driftbench
