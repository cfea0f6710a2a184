#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "driftbench/backend.hpp"
#include "driftbench/dataset.hpp"
#include "driftbench/error.hpp"
#include "driftbench/hash.hpp"

namespace driftbench {

inline std::string prompt_fingerprint(const PromptText& prompt) {
  return sha256_hex(prompt.text);
}

// ---------------------------------------------------------------------------
// Scripted mock: replays fully specified generations, keyed by the SHA-256
// fingerprint of the exact prompt bytes or by call ordinal.
// ---------------------------------------------------------------------------

struct ScriptedMockSpec {
  std::unordered_map<std::string, Generation> by_fingerprint;
  std::vector<Generation> by_ordinal;
};

namespace detail {

inline void validate_scripted_generation(const Generation& gen, const std::string& where) {
  for (const TokenLogprob& tok : gen.tokens) {
    double total = 0.0;
    for (const TokenCandidate& cand : tok.top_candidates) {
      if (cand.logprob > 0.0) {
        throw ValidationError(where + ": candidate probability above 1");
      }
      total += std::exp(cand.logprob);
    }
    if (total > 1.0 + 1e-6) {
      throw ValidationError(where + ": candidate probabilities sum to " +
                            std::to_string(total));
    }
    if (!std::is_sorted(tok.top_candidates.begin(), tok.top_candidates.end(),
                        [](const TokenCandidate& a, const TokenCandidate& b) {
                          return a.logprob > b.logprob;
                        })) {
      throw ValidationError(where + ": candidates not sorted by logprob descending");
    }
  }
}

inline Generation generation_from_json(const nlohmann::json& obj, const std::string& where) {
  Generation gen;
  gen.answer_text = obj.value("answer", "");
  gen.model_spec_id = obj.value("model", "");
  if (!obj.contains("tokens") || !obj.at("tokens").is_array()) {
    throw ParseError(where + ": generation needs a \"tokens\" array");
  }
  for (const auto& tok_json : obj.at("tokens")) {
    TokenLogprob tok;
    tok.token = tok_json.value("token", "");
    if (!tok_json.contains("logprob")) {
      throw ParseError(where + ": token entry missing \"logprob\"");
    }
    tok.logprob = tok_json.at("logprob").get<double>();
    if (tok_json.contains("top")) {
      for (const auto& cand : tok_json.at("top")) {
        if (!cand.is_array() || cand.size() != 2) {
          throw ParseError(where + ": \"top\" entries must be [token, logprob] pairs");
        }
        tok.top_candidates.push_back(
            {cand.at(0).get<std::string>(), cand.at(1).get<double>()});
      }
    }
    gen.tokens.push_back(std::move(tok));
  }
  return gen;
}

}  // namespace detail

inline ScriptedMockSpec parse_scripted_spec(const nlohmann::json& doc) {
  if (doc.value("schema_version", 0) != 1) {
    throw ParseError("scripted mock config: unsupported schema_version");
  }
  if (doc.value("kind", "") != "scripted") {
    throw ParseError("scripted mock config: expected kind \"scripted\"");
  }
  ScriptedMockSpec spec;
  if (doc.contains("entries")) {
    for (const auto& entry : doc.at("entries")) {
      std::string fp;
      if (entry.contains("prompt_sha256")) {
        fp = entry.at("prompt_sha256").get<std::string>();
      } else if (entry.contains("prompt")) {
        fp = sha256_hex(entry.at("prompt").get<std::string>());
      } else {
        throw ParseError("scripted entry needs \"prompt\" or \"prompt_sha256\"");
      }
      Generation gen = detail::generation_from_json(entry.at("generation"), "entry " + fp);
      detail::validate_scripted_generation(gen, "entry " + fp);
      spec.by_fingerprint[fp] = std::move(gen);
    }
  }
  if (doc.contains("by_ordinal")) {
    for (const auto& entry : doc.at("by_ordinal")) {
      Generation gen = detail::generation_from_json(entry, "ordinal entry");
      detail::validate_scripted_generation(gen, "ordinal entry");
      spec.by_ordinal.push_back(std::move(gen));
    }
  }
  return spec;
}

inline ScriptedMockSpec load_scripted_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open scripted mock config: " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("scripted mock config: " + std::string(ex.what()));
  }
  return parse_scripted_spec(doc);
}

class ScriptedMockBackend : public Backend {
public:
  ScriptedMockBackend(ModelSpec model, ScriptedMockSpec script)
      : model_(std::move(model)), script_(std::move(script)) {
    model_.kind = BackendKind::ScriptedMock;
  }

  const ModelSpec& spec() const override { return model_; }

private:
  Generation do_generate(const PromptText& prompt, const GenerateContext&) override {
    const std::string fp = prompt_fingerprint(prompt);
    if (auto it = script_.by_fingerprint.find(fp); it != script_.by_fingerprint.end()) {
      Generation gen = it->second;
      if (gen.model_spec_id.empty()) {
        gen.model_spec_id = model_.model_name;
      }
      return gen;
    }
    if (!script_.by_ordinal.empty()) {
      std::lock_guard<std::mutex> lock(ordinal_mutex_);
      if (next_ordinal_ < script_.by_ordinal.size()) {
        Generation gen = script_.by_ordinal[next_ordinal_++];
        if (gen.model_spec_id.empty()) {
          gen.model_spec_id = model_.model_name;
        }
        return gen;
      }
    }
    throw ProtocolError("no scripted generation for prompt fingerprint " + fp);
  }

  ModelSpec model_;
  ScriptedMockSpec script_;
  std::mutex ordinal_mutex_;
  std::size_t next_ordinal_ = 0;
};

// ---------------------------------------------------------------------------
// Drift mock: a synthetic model whose accuracy and confidence depend on how
// many times the false statement appears in the prompt. Outcomes are drawn
// from a hash of (seed, nonce, prompt bytes), so a fixed seed reproduces the
// same generations in any request order and across resumed runs.
// ---------------------------------------------------------------------------

struct DriftProfile {
  double correct_top_prob = 0.95;    // chosen-token probability on correct answers
  double incorrect_top_prob = 0.60;  // chosen-token probability on incorrect answers
  double jitter = 0.0;               // max absolute per-token deviation
};

struct DriftMockSpec {
  std::map<int, double> correct_prob_by_k;  // k = false-fact repetitions, 0 = baseline
  std::map<int, DriftProfile> profile_by_k;
  std::uint64_t seed = 0;
  int candidates_per_token = 10;
};

inline void lint_drift_spec(const DriftMockSpec& spec) {
  if (spec.correct_prob_by_k.empty()) {
    throw ValidationError("drift mock config: correct_prob_by_k is empty");
  }
  double prev = 1.0 + 1e-12;
  for (const auto& [k, p] : spec.correct_prob_by_k) {
    if (p < 0.0 || p > 1.0) {
      throw ValidationError("drift mock config: probability out of [0,1] at k=" +
                            std::to_string(k));
    }
    if (p > prev) {
      throw ValidationError(
          "drift mock config: correct_prob_by_k must be non-increasing in k");
    }
    prev = p;
  }
  for (const auto& [k, prof] : spec.profile_by_k) {
    for (double p : {prof.correct_top_prob, prof.incorrect_top_prob}) {
      if (p <= 0.0 || p > 1.0) {
        throw ValidationError("drift mock config: top_prob out of (0,1] at k=" +
                              std::to_string(k));
      }
    }
  }
  if (spec.candidates_per_token < 1) {
    throw ValidationError("drift mock config: candidates_per_token must be >= 1");
  }
}

inline DriftMockSpec parse_drift_spec(const nlohmann::json& doc) {
  if (doc.value("schema_version", 0) != 1) {
    throw ParseError("drift mock config: unsupported schema_version");
  }
  if (doc.value("kind", "") != "drift") {
    throw ParseError("drift mock config: expected kind \"drift\"");
  }
  DriftMockSpec spec;
  spec.seed = doc.value("seed", 0ULL);
  spec.candidates_per_token = doc.value("candidates_per_token", 10);
  if (doc.contains("correct_prob_by_k")) {
    for (const auto& [key, value] : doc.at("correct_prob_by_k").items()) {
      spec.correct_prob_by_k[std::stoi(key)] = value.get<double>();
    }
  }
  if (doc.contains("profile_by_k")) {
    for (const auto& [key, value] : doc.at("profile_by_k").items()) {
      DriftProfile prof;
      prof.correct_top_prob = value.value("correct_top_prob", prof.correct_top_prob);
      prof.incorrect_top_prob = value.value("incorrect_top_prob", prof.incorrect_top_prob);
      prof.jitter = value.value("jitter", prof.jitter);
      spec.profile_by_k[std::stoi(key)] = prof;
    }
  }
  lint_drift_spec(spec);
  return spec;
}

inline DriftMockSpec load_drift_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open drift mock config: " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("drift mock config: " + std::string(ex.what()));
  }
  return parse_drift_spec(doc);
}

// Accuracy-by-k shaped like the weakest model reported for this protocol,
// with confidence on incorrect answers sharpening as k grows.
inline DriftMockSpec default_drift_spec(std::uint64_t seed = 0) {
  DriftMockSpec spec;
  spec.seed = seed;
  spec.correct_prob_by_k = {{0, 0.99}, {1, 0.5}, {2, 0.35}, {5, 0.29}, {10, 0.27}};
  spec.profile_by_k = {
      {0, {.correct_top_prob = 0.93, .incorrect_top_prob = 0.55, .jitter = 0.01}},
      {1, {.correct_top_prob = 0.92, .incorrect_top_prob = 0.62, .jitter = 0.01}},
      {2, {.correct_top_prob = 0.92, .incorrect_top_prob = 0.72, .jitter = 0.01}},
      {5, {.correct_top_prob = 0.91, .incorrect_top_prob = 0.84, .jitter = 0.01}},
      {10, {.correct_top_prob = 0.91, .incorrect_top_prob = 0.93, .jitter = 0.01}},
  };
  return spec;
}

class DriftMockBackend : public Backend {
public:
  DriftMockBackend(ModelSpec model, DriftMockSpec drift, std::span<const QAItem> corpus)
      : model_(std::move(model)), drift_(std::move(drift)) {
    model_.kind = BackendKind::DriftMock;
    lint_drift_spec(drift_);
    for (const QAItem& item : corpus) {
      items_by_question_.emplace(item.question, item);
    }
  }

  const ModelSpec& spec() const override { return model_; }

private:
  template <typename T>
  static const T& lookup_by_k(const std::map<int, T>& table, int k) {
    auto it = table.upper_bound(k);
    if (it == table.begin()) {
      return it->second;  // below the smallest key: use the first entry
    }
    return std::prev(it)->second;
  }

  double draw(std::string_view salt, const PromptText& prompt,
              const GenerateContext& ctx, int token_index = -1) const {
    std::string material;
    material.reserve(prompt.text.size() + 48);
    material += std::to_string(drift_.seed);
    material.push_back('|');
    material += std::to_string(ctx.nonce);
    material.push_back('|');
    material += salt;
    material.push_back('|');
    material += std::to_string(token_index);
    material.push_back('|');
    material += prompt.text;
    return unit_uniform(sha256_prefix64(material));
  }

  // Splits an answer into word-level tokens, later words keeping their
  // leading space, mirroring how BPE tokenizers surface short answers.
  static std::vector<std::string> tokenize_answer(const std::string& answer,
                                                  int max_tokens) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos < answer.size() && static_cast<int>(tokens.size()) < max_tokens) {
      std::size_t space = answer.find(' ', pos + 1);
      if (space == std::string::npos) {
        space = answer.size();
      }
      tokens.push_back(answer.substr(pos, space - pos));
      pos = space;
    }
    if (tokens.empty()) {
      tokens.push_back(answer.empty() ? "?" : answer);
    }
    return tokens;
  }

  Generation do_generate(const PromptText& prompt, const GenerateContext& ctx) override {
    const QAItem* item = nullptr;
    for (const ComponentSpan& span : prompt.components) {
      if (span.label == ComponentLabel::Question) {
        const std::string question =
            prompt.text.substr(span.start, span.end - span.start);
        auto it = items_by_question_.find(question);
        if (it != items_by_question_.end()) {
          item = &it->second;
        }
        break;
      }
    }
    if (item == nullptr) {
      throw ProtocolError("drift mock: prompt question not found in corpus");
    }

    const int k = count_fact_repetitions(prompt, item->false_fact);
    const double p_correct = lookup_by_k(drift_.correct_prob_by_k, k);
    const bool correct = draw("outcome", prompt, ctx) < p_correct;

    std::string answer;
    if (correct) {
      answer = item->answer_key.aliases.front();
    } else {
      // Echo the injected claim; the leak invariant guarantees it never
      // contains a true alias, so classification stays incorrect.
      answer = item->false_fact;
      while (!answer.empty() &&
             (answer.back() == '.' || answer.back() == '!' || answer.back() == ' ')) {
        answer.pop_back();
      }
    }

    const DriftProfile& profile = lookup_by_k(drift_.profile_by_k, k);
    const double base_prob = correct ? profile.correct_top_prob : profile.incorrect_top_prob;
    const int n_candidates = std::min(drift_.candidates_per_token,
                                      std::max(1, model_.top_logprobs_requested));

    Generation gen;
    gen.model_spec_id = model_.model_name;
    std::vector<std::string> words = tokenize_answer(answer, model_.max_answer_tokens);
    for (std::size_t t = 0; t < words.size(); ++t) {
      double p = base_prob;
      if (profile.jitter > 0.0) {
        p += (draw("token", prompt, ctx, static_cast<int>(t)) - 0.5) * 2.0 * profile.jitter;
      }
      const double floor = n_candidates > 1 ? 1.0 / n_candidates + 1e-6 : 1e-6;
      p = std::clamp(p, floor, 1.0);

      TokenLogprob tok;
      tok.token = words[t];
      tok.logprob = std::log(p);
      tok.top_candidates.push_back({tok.token, tok.logprob});
      if (p < 1.0 && n_candidates > 1) {
        const double tail = (1.0 - p) / (n_candidates - 1);
        if (tail > 0.0) {
          const double tail_logprob = std::log(tail);
          for (int c = 1; c < n_candidates; ++c) {
            tok.top_candidates.push_back({"alt" + std::to_string(c), tail_logprob});
          }
        }
      }
      gen.tokens.push_back(std::move(tok));
      gen.answer_text += words[t];
    }
    return gen;
  }

  ModelSpec model_;
  DriftMockSpec drift_;
  std::unordered_map<std::string, QAItem> items_by_question_;
};

}  // namespace driftbench
