#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "driftbench/dataset.hpp"
#include "driftbench/metrics.hpp"

namespace driftbench::testing {

// A generation whose chosen-token probabilities are given directly; each
// position gets a single candidate mirroring the chosen token.
inline Generation generation_from_probs(const std::vector<double>& probs) {
  Generation gen;
  gen.model_spec_id = "test";
  for (std::size_t i = 0; i < probs.size(); ++i) {
    TokenLogprob tok;
    tok.token = "t" + std::to_string(i);
    tok.logprob = std::log(probs[i]);
    tok.top_candidates.push_back({tok.token, tok.logprob});
    gen.tokens.push_back(std::move(tok));
    gen.answer_text += tok.token;
  }
  return gen;
}

// Random generation satisfying the type invariants: 1..8 tokens, 1..10
// candidates sorted descending with total mass <= 1, chosen token somewhere
// in the candidate list.
inline Generation random_generation(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_tokens_dist(1, 8);
  std::uniform_int_distribution<int> n_cands_dist(1, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Generation gen;
  gen.model_spec_id = "random";
  const int n_tokens = n_tokens_dist(rng);
  for (int t = 0; t < n_tokens; ++t) {
    const int n_cands = n_cands_dist(rng);
    // Random positive weights scaled to total mass in (0, 1].
    std::vector<double> weights(static_cast<std::size_t>(n_cands));
    double weight_sum = 0.0;
    for (double& w : weights) {
      w = unit(rng) + 1e-4;
      weight_sum += w;
    }
    const double mass = 0.2 + 0.8 * unit(rng);
    std::vector<double> probs;
    for (double w : weights) {
      probs.push_back(w / weight_sum * mass);
    }
    std::sort(probs.begin(), probs.end(), std::greater<double>());

    TokenLogprob tok;
    tok.token = "tok" + std::to_string(t);
    for (std::size_t c = 0; c < probs.size(); ++c) {
      tok.top_candidates.push_back(
          {c == 0 ? tok.token : "c" + std::to_string(c), std::log(probs[c])});
    }
    const std::size_t chosen =
        std::uniform_int_distribution<std::size_t>(0, probs.size() - 1)(rng);
    tok.logprob = tok.top_candidates[chosen].logprob;
    gen.tokens.push_back(std::move(tok));
    gen.answer_text += "tok" + std::to_string(t);
  }
  return gen;
}

inline QAItem make_item(const std::string& id, const std::string& question,
                        std::vector<std::string> aliases, const std::string& false_fact,
                        const std::string& random_fact) {
  QAItem item;
  item.id = id;
  item.question = question;
  item.answer_key.aliases = std::move(aliases);
  item.false_fact = false_fact;
  item.random_fact = random_fact;
  return item;
}

inline QAItem kubrick_item() {
  return make_item("kubrick", "Who directed 2001: A Space Odyssey?",
                   {"Stanley Kubrick", "Kubrick"},
                   "Alfred Hitchcock directed 2001: A Space Odyssey.",
                   "In the 1960s, video recorders were first developed.");
}

// Synthetic corpus with distinct answers and false facts; false facts never
// mention the answer, so the leak validator accepts them.
inline std::vector<QAItem> synthetic_corpus(int n) {
  std::vector<QAItem> items;
  items.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::string idx = std::to_string(i);
    items.push_back(make_item(
        "item" + idx, "What is the codename of project " + idx + "?",
        {"Aurora" + idx}, "The codename of project " + idx + " is Borealis" + idx + ".",
        "Lighthouses were once powered by whale oil."));
  }
  return items;
}

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("driftbench_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace driftbench::testing
