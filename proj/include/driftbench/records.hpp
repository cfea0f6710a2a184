#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftbench/backend.hpp"
#include "driftbench/error.hpp"
#include "driftbench/hash.hpp"
#include "driftbench/metrics.hpp"
#include "driftbench/prompt.hpp"
#include "driftbench/version.hpp"

namespace driftbench {

// One persisted generation: everything needed to re-audit metrics and
// correctness offline.
struct RunRecord {
  int run_index = 0;
  std::string item_id;
  PromptCondition condition;
  std::string model;
  std::string prompt_text;
  std::string answer_text;
  std::vector<TokenLogprob> tokens;
  MetricBundle metrics;
  bool correct = false;
  bool failed = false;
  std::string error;
  int candidate_count_min = 0;
  std::string cache_key;
  std::optional<std::int64_t> started_unix_ms;
  std::optional<std::int64_t> finished_unix_ms;
};

struct RunFileHeader {
  int schema_version = 1;
  std::string harness_version = kDriftbenchVersion;
  std::string model;
  std::string backend;
  std::string base_url;
  double temperature = 1.0;
  int max_answer_tokens = 64;
  int top_logprobs = 10;
  int entropy_top_k = 10;
  std::vector<PromptCondition> conditions;
  int runs_per_condition = 10;
  int concurrency = 1;
  std::uint64_t seed = 0;
  std::string corpus_path;
  std::string corpus_sha256;
  std::size_t eligible_count = 0;
  std::optional<std::int64_t> created_unix_ms;
};

inline std::string make_cache_key(const std::string& model_name, const std::string& base_url,
                                  double temperature, int max_answer_tokens,
                                  const std::string& prompt_text, int run_index) {
  nlohmann::ordered_json key;
  key["model"] = model_name;
  key["base_url"] = base_url;
  key["temperature"] = temperature;
  key["max_tokens"] = max_answer_tokens;
  key["run_index"] = run_index;
  key["prompt"] = prompt_text;
  return sha256_hex(key.dump());
}

namespace detail {

inline nlohmann::ordered_json condition_to_json(const PromptCondition& cond) {
  nlohmann::ordered_json obj;
  switch (cond.kind) {
    case ConditionKind::Baseline:
      obj["kind"] = "b";
      break;
    case ConditionKind::FalseInfo:
      obj["kind"] = "fip";
      break;
    case ConditionKind::RandomInfo:
      obj["kind"] = "rip";
      break;
  }
  obj["k"] = cond.repetitions;
  obj["variant"] = variant_name(cond.variant);
  return obj;
}

inline PromptCondition condition_from_json(const nlohmann::json& obj) {
  PromptCondition cond;
  const std::string kind = obj.value("kind", "");
  if (kind == "b") {
    cond.kind = ConditionKind::Baseline;
  } else if (kind == "fip") {
    cond.kind = ConditionKind::FalseInfo;
  } else if (kind == "rip") {
    cond.kind = ConditionKind::RandomInfo;
  } else {
    throw ParseError("unknown condition kind \"" + kind + "\"");
  }
  cond.repetitions = obj.value("k", 0);
  cond.variant = parse_variant(obj.value("variant", "v1"));
  return cond;
}

inline nlohmann::ordered_json tokens_to_json(const std::vector<TokenLogprob>& tokens) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const TokenLogprob& tok : tokens) {
    nlohmann::ordered_json tok_json;
    tok_json["token"] = tok.token;
    tok_json["logprob"] = tok.logprob;
    nlohmann::ordered_json top = nlohmann::ordered_json::array();
    for (const TokenCandidate& cand : tok.top_candidates) {
      top.push_back(nlohmann::ordered_json::array({cand.token, cand.logprob}));
    }
    tok_json["top"] = std::move(top);
    arr.push_back(std::move(tok_json));
  }
  return arr;
}

inline std::vector<TokenLogprob> tokens_from_json(const nlohmann::json& arr) {
  std::vector<TokenLogprob> tokens;
  for (const auto& tok_json : arr) {
    TokenLogprob tok;
    tok.token = tok_json.value("token", "");
    tok.logprob = tok_json.at("logprob").get<double>();
    if (tok_json.contains("top")) {
      for (const auto& cand : tok_json.at("top")) {
        tok.top_candidates.push_back(
            {cand.at(0).get<std::string>(), cand.at(1).get<double>()});
      }
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

}  // namespace detail

inline nlohmann::ordered_json record_to_json(const RunRecord& record) {
  nlohmann::ordered_json obj;
  obj["type"] = "record";
  obj["run_index"] = record.run_index;
  obj["item_id"] = record.item_id;
  obj["condition"] = detail::condition_to_json(record.condition);
  obj["model"] = record.model;
  obj["prompt"] = record.prompt_text;
  obj["answer"] = record.answer_text;
  obj["tokens"] = detail::tokens_to_json(record.tokens);
  obj["metrics"] = {{"entropy", record.metrics.entropy},
                    {"perplexity", record.metrics.perplexity},
                    {"token_probability", record.metrics.token_probability}};
  obj["correct"] = record.correct;
  obj["failed"] = record.failed;
  if (record.failed) {
    obj["error"] = record.error;
  }
  obj["candidate_count_min"] = record.candidate_count_min;
  obj["cache_key"] = record.cache_key;
  if (record.started_unix_ms) {
    obj["started_unix_ms"] = *record.started_unix_ms;
    obj["finished_unix_ms"] = record.finished_unix_ms.value_or(*record.started_unix_ms);
  }
  return obj;
}

inline RunRecord record_from_json(const nlohmann::json& obj) {
  RunRecord record;
  record.run_index = obj.value("run_index", 0);
  record.item_id = obj.value("item_id", "");
  record.condition = detail::condition_from_json(obj.at("condition"));
  record.model = obj.value("model", "");
  record.prompt_text = obj.value("prompt", "");
  record.answer_text = obj.value("answer", "");
  if (obj.contains("tokens")) {
    record.tokens = detail::tokens_from_json(obj.at("tokens"));
  }
  if (obj.contains("metrics")) {
    const auto& m = obj.at("metrics");
    record.metrics.entropy = m.value("entropy", 0.0);
    record.metrics.perplexity = m.value("perplexity", 1.0);
    record.metrics.token_probability = m.value("token_probability", 1.0);
  }
  record.correct = obj.value("correct", false);
  record.failed = obj.value("failed", false);
  record.error = obj.value("error", "");
  record.candidate_count_min = obj.value("candidate_count_min", 0);
  record.cache_key = obj.value("cache_key", "");
  if (obj.contains("started_unix_ms")) {
    record.started_unix_ms = obj.at("started_unix_ms").get<std::int64_t>();
  }
  if (obj.contains("finished_unix_ms")) {
    record.finished_unix_ms = obj.at("finished_unix_ms").get<std::int64_t>();
  }
  return record;
}

inline nlohmann::ordered_json header_to_json(const RunFileHeader& header) {
  nlohmann::ordered_json obj;
  obj["type"] = "header";
  obj["schema_version"] = header.schema_version;
  obj["harness_version"] = header.harness_version;
  obj["model"] = header.model;
  obj["backend"] = header.backend;
  obj["base_url"] = header.base_url;
  obj["temperature"] = header.temperature;
  obj["max_answer_tokens"] = header.max_answer_tokens;
  obj["top_logprobs"] = header.top_logprobs;
  obj["entropy_top_k"] = header.entropy_top_k;
  nlohmann::ordered_json conds = nlohmann::ordered_json::array();
  for (const PromptCondition& cond : header.conditions) {
    conds.push_back(detail::condition_to_json(cond));
  }
  obj["conditions"] = std::move(conds);
  obj["runs_per_condition"] = header.runs_per_condition;
  obj["concurrency"] = header.concurrency;
  obj["seed"] = header.seed;
  obj["corpus_path"] = header.corpus_path;
  obj["corpus_sha256"] = header.corpus_sha256;
  obj["eligible_count"] = header.eligible_count;
  if (header.created_unix_ms) {
    obj["created_unix_ms"] = *header.created_unix_ms;
  }
  return obj;
}

inline RunFileHeader header_from_json(const nlohmann::json& obj) {
  RunFileHeader header;
  header.schema_version = obj.value("schema_version", 0);
  if (header.schema_version != 1) {
    throw ParseError("unsupported record file schema_version");
  }
  header.harness_version = obj.value("harness_version", "");
  header.model = obj.value("model", "");
  header.backend = obj.value("backend", "");
  header.base_url = obj.value("base_url", "");
  header.temperature = obj.value("temperature", 1.0);
  header.max_answer_tokens = obj.value("max_answer_tokens", 64);
  header.top_logprobs = obj.value("top_logprobs", 10);
  header.entropy_top_k = obj.value("entropy_top_k", 10);
  if (obj.contains("conditions")) {
    for (const auto& cond : obj.at("conditions")) {
      header.conditions.push_back(detail::condition_from_json(cond));
    }
  }
  header.runs_per_condition = obj.value("runs_per_condition", 0);
  header.concurrency = obj.value("concurrency", 1);
  header.seed = obj.value("seed", 0ULL);
  header.corpus_path = obj.value("corpus_path", "");
  header.corpus_sha256 = obj.value("corpus_sha256", "");
  header.eligible_count = obj.value("eligible_count", 0ULL);
  if (obj.contains("created_unix_ms")) {
    header.created_unix_ms = obj.at("created_unix_ms").get<std::int64_t>();
  }
  return header;
}

struct RecordFile {
  RunFileHeader header;
  std::vector<RunRecord> records;
};

inline RecordFile read_record_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open record file: " + path.string());
  }
  RecordFile file;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("invalid record JSON: ") + ex.what(), line_no);
    }
    const std::string type = obj.value("type", "");
    if (type == "header") {
      if (saw_header) {
        throw ParseError("duplicate header record", line_no);
      }
      file.header = header_from_json(obj);
      saw_header = true;
    } else if (type == "record") {
      file.records.push_back(record_from_json(obj));
    } else {
      throw ParseError("unknown record type \"" + type + "\"", line_no);
    }
  }
  if (!saw_header) {
    throw ParseError("record file has no header record");
  }
  return file;
}

// Append-only JSONL writer. Reopening an existing file validates that the
// on-disk header matches every sampling-relevant setting, then resumes.
class RecordWriter {
public:
  RecordWriter(std::filesystem::path path, const RunFileHeader& header)
      : path_(std::move(path)) {
    namespace fs = std::filesystem;
    if (fs::exists(path_) && fs::file_size(path_) > 0) {
      RecordFile existing = read_record_file(path_);
      check_compatible(existing.header, header);
      for (RunRecord& record : existing.records) {
        if (!record.failed && !record.cache_key.empty()) {
          cached_.emplace(record.cache_key, std::move(record));
        }
      }
      resumed_ = true;
    }
    out_.open(path_, std::ios::app);
    if (!out_) {
      throw IoError("cannot open record file for writing: " + path_.string());
    }
    if (!resumed_) {
      out_ << header_to_json(header).dump() << '\n';
      out_.flush();
    }
  }

  bool resumed() const { return resumed_; }

  const std::unordered_map<std::string, RunRecord>& cached() const { return cached_; }

  void append(const RunRecord& record) {
    out_ << record_to_json(record).dump() << '\n';
    out_.flush();
    if (!out_) {
      throw IoError("write failed: " + path_.string());
    }
  }

private:
  static void check_compatible(const RunFileHeader& on_disk, const RunFileHeader& now) {
    auto mismatch = [](const std::string& what) {
      throw ValidationError("cannot resume: output file was produced with a different " +
                            what);
    };
    if (on_disk.model != now.model) mismatch("model");
    if (on_disk.backend != now.backend) mismatch("backend");
    if (on_disk.base_url != now.base_url) mismatch("base_url");
    if (on_disk.temperature != now.temperature) mismatch("temperature");
    if (on_disk.max_answer_tokens != now.max_answer_tokens) mismatch("max_answer_tokens");
    if (on_disk.top_logprobs != now.top_logprobs) mismatch("top_logprobs");
    if (on_disk.entropy_top_k != now.entropy_top_k) mismatch("entropy_top_k");
    if (on_disk.seed != now.seed) mismatch("seed");
    if (on_disk.corpus_sha256 != now.corpus_sha256) mismatch("corpus");
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::unordered_map<std::string, RunRecord> cached_;
  bool resumed_ = false;
};

}  // namespace driftbench
