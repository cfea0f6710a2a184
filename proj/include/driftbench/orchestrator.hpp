#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "driftbench/backend.hpp"
#include "driftbench/correctness.hpp"
#include "driftbench/dataset.hpp"
#include "driftbench/error.hpp"
#include "driftbench/metrics.hpp"
#include "driftbench/prompt.hpp"
#include "driftbench/records.hpp"

namespace driftbench {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_delay{10'000};
};

// Runs fn, retrying on retryable backend errors with exponential backoff.
// Non-retryable errors and exhausted attempts propagate.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) {
  auto delay = policy.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const BackendError& error) {
      if (!error.retryable() || attempt >= policy.max_attempts) {
        throw;
      }
      std::this_thread::sleep_for(std::min(delay, policy.max_delay));
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(delay.count()) *
                                    policy.backoff_multiplier));
    }
  }
}

namespace detail {

// Executes fn(0..n-1) on up to `concurrency` threads and hands results to
// sink in index order on the calling thread. The first exception (from fn
// or sink) aborts outstanding work and is rethrown after joining.
template <typename Result, typename Fn, typename Sink>
void parallel_ordered(std::size_t n, int concurrency, Fn&& fn, Sink&& sink) {
  if (n == 0) {
    return;
  }
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(concurrency, 1)), n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      sink(i, fn(i));
    }
    return;
  }

  std::vector<std::optional<Result>> results(n);
  std::mutex mutex;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  bool abort = false;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) {
        break;
      }
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (abort) {
          break;
        }
      }
      try {
        Result r = fn(i);
        std::lock_guard<std::mutex> lock(mutex);
        results[i] = std::move(r);
        cv.notify_all();
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!error) {
          error = std::current_exception();
        }
        abort = true;
        cv.notify_all();
        break;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back(worker);
  }

  std::size_t cursor = 0;
  {
    std::unique_lock<std::mutex> lock(mutex);
    while (cursor < n) {
      cv.wait(lock, [&] { return abort || results[cursor].has_value(); });
      if (!results[cursor].has_value()) {
        break;  // aborted with this slot never filled
      }
      Result r = std::move(*results[cursor]);
      results[cursor].reset();
      lock.unlock();
      try {
        sink(cursor, std::move(r));
      } catch (...) {
        lock.lock();
        if (!error) {
          error = std::current_exception();
        }
        abort = true;
        next.store(n);  // stop workers from picking new tasks
        break;
      }
      lock.lock();
      ++cursor;
    }
  }
  for (std::thread& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

inline std::int64_t unix_time_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Baseline identification: one pass over the corpus with the plain prompt;
// items answered correctly become the eligible set for all later sweeps.
// ---------------------------------------------------------------------------

struct BaselineReport {
  std::vector<std::string> eligible_ids;
  std::vector<std::string> failed_ids;  // gave up after retries; counted incorrect
  std::size_t corpus_size = 0;
  double accuracy = 0.0;
};

inline BaselineReport identify_baseline(std::span<const QAItem> corpus, Backend& backend,
                                        Variant variant = Variant::V1,
                                        const RetryPolicy& retry = {},
                                        int concurrency = 4) {
  BaselineReport report;
  report.corpus_size = corpus.size();
  if (corpus.empty()) {
    return report;
  }
  struct Outcome {
    bool correct = false;
    bool failed = false;
  };
  std::vector<Outcome> outcomes(corpus.size());
  detail::parallel_ordered<Outcome>(
      corpus.size(), concurrency,
      [&](std::size_t i) -> Outcome {
        const QAItem& item = corpus[i];
        const PromptText prompt = build_prompt(item, PromptCondition::baseline(variant));
        try {
          Generation gen = with_retries(
              retry, [&] { return backend.generate(prompt, GenerateContext{0}); });
          return Outcome{.correct = is_correct(item.answer_key, gen.answer_text),
                         .failed = false};
        } catch (const CapabilityError&) {
          throw;  // model unusable for this harness; abort the pass
        } catch (const BackendError&) {
          return Outcome{.correct = false, .failed = true};
        }
      },
      [&](std::size_t i, Outcome outcome) { outcomes[i] = outcome; });

  std::size_t correct_count = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (outcomes[i].failed) {
      report.failed_ids.push_back(corpus[i].id);
    } else if (outcomes[i].correct) {
      report.eligible_ids.push_back(corpus[i].id);
      ++correct_count;
    }
  }
  report.accuracy =
      static_cast<double>(correct_count) / static_cast<double>(corpus.size());
  return report;
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

struct RunConfig {
  std::filesystem::path corpus_path;
  std::string corpus_sha256;
  std::vector<PromptCondition> conditions;
  int runs_per_condition = 10;
  int entropy_top_k = 10;
  int concurrency_limit = 4;
  RetryPolicy retry;
  std::filesystem::path output_path;
  std::uint64_t master_seed = 0;
  bool record_timestamps = true;
  std::optional<std::size_t> limit;  // cap on new generations this invocation
};

struct RunResult {
  std::vector<RunRecord> records;  // cached + newly produced, task order
  std::size_t issued = 0;          // tasks that reached the backend
  std::size_t cached = 0;          // tasks satisfied from the existing file
  std::size_t skipped = 0;         // tasks beyond the --limit cap
  std::size_t failures = 0;        // failed records among `records`
};

inline RunFileHeader make_run_header(const RunConfig& config, const ModelSpec& model,
                                     std::size_t eligible_count) {
  RunFileHeader header;
  header.model = model.model_name;
  header.backend = backend_kind_name(model.kind);
  header.base_url = model.base_url;
  header.temperature = model.temperature;
  header.max_answer_tokens = model.max_answer_tokens;
  header.top_logprobs = model.top_logprobs_requested;
  header.entropy_top_k = config.entropy_top_k;
  header.conditions = config.conditions;
  header.runs_per_condition = config.runs_per_condition;
  header.concurrency = config.concurrency_limit;
  header.seed = config.master_seed;
  header.corpus_path = config.corpus_path.string();
  header.corpus_sha256 = config.corpus_sha256;
  header.eligible_count = eligible_count;
  if (config.record_timestamps) {
    header.created_unix_ms = detail::unix_time_ms();
  }
  return header;
}

// Runs every (condition x run x item) cell, persisting records as they
// complete. Cells already present in the output file are not re-issued.
inline RunResult run_experiment(const RunConfig& config, std::span<const QAItem> eligible,
                                Backend& backend) {
  if (eligible.empty()) {
    throw ValidationError("eligible item set is empty");
  }
  if (config.conditions.empty()) {
    throw ValidationError("no conditions configured");
  }
  if (config.runs_per_condition < 1) {
    throw ValidationError("runs_per_condition must be >= 1");
  }

  struct Task {
    PromptCondition condition;
    int run_index = 0;
    const QAItem* item = nullptr;
    PromptText prompt;
    std::string cache_key;
  };
  const ModelSpec& model = backend.spec();
  std::vector<Task> tasks;
  tasks.reserve(config.conditions.size() *
                static_cast<std::size_t>(config.runs_per_condition) * eligible.size());
  for (const PromptCondition& condition : config.conditions) {
    for (int run = 0; run < config.runs_per_condition; ++run) {
      for (const QAItem& item : eligible) {
        Task task;
        task.condition = condition;
        task.run_index = run;
        task.item = &item;
        task.prompt = build_prompt(item, condition);
        task.cache_key =
            make_cache_key(model.model_name, model.base_url, model.temperature,
                           model.max_answer_tokens, task.prompt.text, run);
        tasks.push_back(std::move(task));
      }
    }
  }

  RecordWriter writer(config.output_path,
                      make_run_header(config, model, eligible.size()));

  std::vector<std::size_t> pending;  // indices into tasks needing a generation
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!writer.cached().contains(tasks[i].cache_key)) {
      pending.push_back(i);
    }
  }
  RunResult result;
  result.cached = tasks.size() - pending.size();
  if (config.limit && pending.size() > *config.limit) {
    result.skipped = pending.size() - *config.limit;
    pending.resize(*config.limit);
  }
  result.issued = pending.size();

  std::vector<RunRecord> fresh(pending.size());
  detail::parallel_ordered<RunRecord>(
      pending.size(), config.concurrency_limit,
      [&](std::size_t i) -> RunRecord {
        const Task& task = tasks[pending[i]];
        RunRecord record;
        record.run_index = task.run_index;
        record.item_id = task.item->id;
        record.condition = task.condition;
        record.model = model.model_name;
        record.prompt_text = task.prompt.text;
        record.cache_key = task.cache_key;
        if (config.record_timestamps) {
          record.started_unix_ms = detail::unix_time_ms();
        }
        try {
          Generation gen = with_retries(config.retry, [&] {
            return backend.generate(
                task.prompt, GenerateContext{static_cast<std::uint64_t>(task.run_index)});
          });
          record.answer_text = gen.answer_text;
          record.tokens = std::move(gen.tokens);
          record.metrics = compute_metrics(
              Generation{record.answer_text, record.tokens, gen.model_spec_id});
          record.correct = is_correct(task.item->answer_key, record.answer_text);
          int min_candidates = record.tokens.empty() ? 0 : model.top_logprobs_requested;
          for (const TokenLogprob& tok : record.tokens) {
            min_candidates =
                std::min(min_candidates, static_cast<int>(tok.top_candidates.size()));
          }
          record.candidate_count_min = min_candidates;
        } catch (const CapabilityError&) {
          throw;  // aborts the whole run
        } catch (const BackendError& error) {
          record.failed = true;
          record.error = error.what();
        }
        if (config.record_timestamps) {
          record.finished_unix_ms = detail::unix_time_ms();
        }
        return record;
      },
      [&](std::size_t i, RunRecord record) {
        writer.append(record);
        fresh[i] = std::move(record);
      });

  // Assemble the full record list in task order.
  std::size_t fresh_cursor = 0;
  std::vector<bool> is_pending(tasks.size(), false);
  for (std::size_t idx : pending) {
    is_pending[idx] = true;
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (is_pending[i]) {
      result.records.push_back(std::move(fresh[fresh_cursor++]));
    } else if (auto it = writer.cached().find(tasks[i].cache_key);
               it != writer.cached().end()) {
      result.records.push_back(it->second);
    }
    // tasks beyond the limit cap are neither cached nor pending: skipped
  }
  for (const RunRecord& record : result.records) {
    if (record.failed) {
      ++result.failures;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Summarization
// ---------------------------------------------------------------------------

enum class AnswerGroup { Correct, Incorrect };

inline std::string answer_group_name(AnswerGroup group) {
  return group == AnswerGroup::Correct ? "correct" : "incorrect";
}

struct SummaryRow {
  std::string model;
  PromptCondition condition;
  AnswerGroup group = AnswerGroup::Correct;
  std::size_t n_records = 0;
  std::optional<AggregateStat> entropy;
  std::optional<AggregateStat> perplexity;
  std::optional<AggregateStat> token_probability;
  std::optional<AggregateStat> accuracy;  // per condition, over runs
};

struct Summary {
  std::string model;
  std::vector<SummaryRow> rows;
  std::optional<double> degradation_percent;  // FIPx10 vs B, when both present
  std::size_t failures = 0;
};

// Accuracy change of the k=10 false-info sweep relative to baseline.
inline double degradation_percent(double acc_baseline, double acc_fip10) {
  if (acc_baseline <= 0.0) {
    throw Error("baseline accuracy is zero; degradation undefined");
  }
  return 100.0 * (acc_fip10 - acc_baseline) / acc_baseline;
}

namespace detail {

struct ConditionOrder {
  bool operator()(const PromptCondition& a, const PromptCondition& b) const {
    auto rank = [](const PromptCondition& c) {
      switch (c.kind) {
        case ConditionKind::Baseline:
          return 0;
        case ConditionKind::RandomInfo:
          return 1;
        case ConditionKind::FalseInfo:
          return 2;
      }
      return 3;
    };
    if (rank(a) != rank(b)) {
      return rank(a) < rank(b);
    }
    if (a.repetitions != b.repetitions) {
      return a.repetitions < b.repetitions;
    }
    return static_cast<int>(a.variant) < static_cast<int>(b.variant);
  }
};

}  // namespace detail

// Collapses records into per-(condition, correctness-group) statistics plus
// per-condition accuracy over runs. Failed records are excluded from the
// uncertainty aggregates but count as incorrect for accuracy.
inline Summary summarize(std::span<const RunRecord> records) {
  if (records.empty()) {
    throw Error("no records to summarize");
  }
  Summary summary;
  summary.model = records.front().model;

  std::map<PromptCondition, std::vector<const RunRecord*>, detail::ConditionOrder>
      by_condition;
  for (const RunRecord& record : records) {
    by_condition[record.condition].push_back(&record);
    if (record.failed) {
      ++summary.failures;
    }
  }

  std::optional<double> acc_baseline;
  std::optional<double> acc_fip10;
  for (const auto& [condition, group_records] : by_condition) {
    // Per-run accuracy; failed records stay in the denominator as incorrect.
    std::map<int, std::pair<std::size_t, std::size_t>> run_counts;  // run -> {correct, total}
    for (const RunRecord* record : group_records) {
      auto& [n_correct, n_total] = run_counts[record->run_index];
      ++n_total;
      if (!record->failed && record->correct) {
        ++n_correct;
      }
    }
    std::vector<double> run_accuracies;
    run_accuracies.reserve(run_counts.size());
    for (const auto& [run, counts] : run_counts) {
      run_accuracies.push_back(static_cast<double>(counts.first) /
                               static_cast<double>(counts.second));
    }
    const AggregateStat accuracy = aggregate(run_accuracies);
    if (condition.kind == ConditionKind::Baseline) {
      acc_baseline = accuracy.mean;
    }
    if (condition.kind == ConditionKind::FalseInfo && condition.repetitions == 10) {
      acc_fip10 = accuracy.mean;
    }

    for (AnswerGroup group : {AnswerGroup::Correct, AnswerGroup::Incorrect}) {
      std::vector<double> entropies;
      std::vector<double> perplexities;
      std::vector<double> token_probs;
      for (const RunRecord* record : group_records) {
        if (record->failed) {
          continue;
        }
        const bool wanted = (group == AnswerGroup::Correct) == record->correct;
        if (!wanted) {
          continue;
        }
        entropies.push_back(record->metrics.entropy);
        perplexities.push_back(record->metrics.perplexity);
        token_probs.push_back(record->metrics.token_probability);
      }
      SummaryRow row;
      row.model = summary.model;
      row.condition = condition;
      row.group = group;
      row.n_records = entropies.size();
      row.accuracy = accuracy;
      if (!entropies.empty()) {
        row.entropy = aggregate(entropies);
        row.perplexity = aggregate(perplexities);
        row.token_probability = aggregate(token_probs);
      }
      summary.rows.push_back(std::move(row));
    }
  }

  if (acc_baseline && acc_fip10 && *acc_baseline > 0.0) {
    summary.degradation_percent = degradation_percent(*acc_baseline, *acc_fip10);
  }
  return summary;
}

}  // namespace driftbench
