#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "driftbench/metrics.hpp"
#include "driftbench/prompt.hpp"

namespace driftbench {

enum class BackendKind { RemoteHttp, ScriptedMock, DriftMock };

struct ModelSpec {
  BackendKind kind = BackendKind::DriftMock;
  std::string model_name;
  std::string base_url;  // RemoteHttp only
  double temperature = 1.0;
  int top_logprobs_requested = 10;
  int max_answer_tokens = 64;
  std::chrono::milliseconds request_timeout{30000};
  std::optional<std::uint64_t> seed;
};

inline std::string backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::RemoteHttp:
      return "remote";
    case BackendKind::ScriptedMock:
      return "scripted-mock";
    case BackendKind::DriftMock:
      return "drift-mock";
  }
  return "?";
}

// Per-call context. The nonce distinguishes repeated submissions of the same
// prompt (the orchestrator passes the run index) so deterministic mocks can
// vary across runs while staying reproducible.
struct GenerateContext {
  std::uint64_t nonce = 0;
};

class Backend {
public:
  virtual ~Backend() = default;

  Generation generate(const PromptText& prompt, const GenerateContext& ctx = {}) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_generate(prompt, ctx);
  }

  std::uint64_t call_count() const { return calls_.load(std::memory_order_relaxed); }

  virtual const ModelSpec& spec() const = 0;

private:
  virtual Generation do_generate(const PromptText& prompt, const GenerateContext& ctx) = 0;

  std::atomic<std::uint64_t> calls_{0};
};

// Non-overlapping occurrence count of fact within the prompt text.
inline int count_fact_repetitions(const PromptText& prompt, std::string_view fact) {
  if (fact.empty()) {
    throw Error("cannot count occurrences of an empty fact");
  }
  int count = 0;
  std::size_t pos = 0;
  while ((pos = prompt.text.find(fact, pos)) != std::string::npos) {
    ++count;
    pos += fact.size();
  }
  return count;
}

}  // namespace driftbench
