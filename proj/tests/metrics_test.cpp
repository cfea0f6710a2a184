#include "driftbench/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "test_support.hpp"

using namespace driftbench;
using driftbench::testing::generation_from_probs;
using driftbench::testing::random_generation;

namespace {

// Independent oracle: evaluates the three definitions directly from the
// candidate probabilities with long double accumulation. Kept separate from
// the library implementation on purpose.
long double oracle_entropy(const Generation& gen) {
  long double total = 0.0L;
  for (const TokenLogprob& tok : gen.tokens) {
    long double h = 0.0L;
    for (const TokenCandidate& cand : tok.top_candidates) {
      const long double p = std::exp(static_cast<long double>(cand.logprob));
      if (p > 0.0L) {
        h += p * std::log(p);
      }
    }
    total += -h;
  }
  return total / static_cast<long double>(gen.tokens.size());
}

long double oracle_perplexity(const Generation& gen) {
  long double sum = 0.0L;
  for (const TokenLogprob& tok : gen.tokens) {
    sum += static_cast<long double>(tok.logprob);
  }
  return std::exp(-sum / static_cast<long double>(gen.tokens.size()));
}

long double oracle_token_probability(const Generation& gen) {
  long double sum = 0.0L;
  for (const TokenLogprob& tok : gen.tokens) {
    sum += std::exp(static_cast<long double>(tok.logprob));
  }
  return sum / static_cast<long double>(gen.tokens.size());
}

Generation uniform_candidates_generation(int n_tokens, int n_candidates) {
  Generation gen;
  const double logprob = std::log(1.0 / n_candidates);
  for (int t = 0; t < n_tokens; ++t) {
    TokenLogprob tok;
    tok.token = "u" + std::to_string(t);
    tok.logprob = logprob;
    for (int c = 0; c < n_candidates; ++c) {
      tok.top_candidates.push_back({"c" + std::to_string(c), logprob});
    }
    gen.tokens.push_back(std::move(tok));
    gen.answer_text += tok.token;
  }
  return gen;
}

}  // namespace

TEST_CASE("entropy of a uniform top-10 distribution is ln 10") {
  const Generation gen = uniform_candidates_generation(1, 10);
  CHECK(sequence_entropy(gen) == Catch::Approx(2.302585092994046).margin(1e-12));
}

TEST_CASE("entropy of deterministic tokens is zero") {
  const Generation gen = generation_from_probs({1.0, 1.0, 1.0});
  CHECK(sequence_entropy(gen) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("entropy averages per-position contributions") {
  Generation gen = uniform_candidates_generation(1, 10);
  Generation det = generation_from_probs({1.0});
  gen.tokens.push_back(det.tokens.front());
  CHECK(sequence_entropy(gen) == Catch::Approx(1.151292546497023).margin(1e-12));
}

TEST_CASE("perplexity matches the frozen cases") {
  CHECK(sequence_perplexity(generation_from_probs({1.0, 1.0, 1.0})) ==
        Catch::Approx(1.0).margin(1e-12));
  CHECK(sequence_perplexity(generation_from_probs({0.5, 0.5})) ==
        Catch::Approx(2.0).margin(1e-12));
  CHECK(sequence_perplexity(generation_from_probs({0.25, 1.0})) ==
        Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("token probability is the arithmetic mean of chosen probabilities") {
  CHECK(sequence_token_probability(generation_from_probs({1.0, 1.0})) == 1.0);
  CHECK(sequence_token_probability(generation_from_probs({0.5, 0.25})) == 0.375);
  CHECK(sequence_token_probability(generation_from_probs({0.9})) ==
        Catch::Approx(0.9).margin(1e-15));
}

TEST_CASE("empty generations are rejected") {
  const Generation empty;
  CHECK_THROWS_AS(sequence_entropy(empty), Error);
  CHECK_THROWS_AS(sequence_perplexity(empty), Error);
  CHECK_THROWS_AS(sequence_token_probability(empty), Error);
}

TEST_CASE("zero-probability candidates contribute no entropy") {
  Generation gen = generation_from_probs({0.5});
  gen.tokens[0].top_candidates.push_back({"never", -1e9});
  const double h_with = sequence_entropy(gen);
  gen.tokens[0].top_candidates.pop_back();
  CHECK(h_with == Catch::Approx(sequence_entropy(gen)).margin(1e-12));
}

TEST_CASE("metrics agree with the independent oracle on random generations") {
  std::mt19937_64 rng(20240811);
  for (int i = 0; i < 500; ++i) {
    const Generation gen = random_generation(rng);
    CHECK(sequence_entropy(gen) ==
          Catch::Approx(static_cast<double>(oracle_entropy(gen))).margin(1e-9));
    CHECK(sequence_perplexity(gen) ==
          Catch::Approx(static_cast<double>(oracle_perplexity(gen))).margin(1e-9));
    CHECK(sequence_token_probability(gen) ==
          Catch::Approx(static_cast<double>(oracle_token_probability(gen))).margin(1e-9));
  }
}

TEST_CASE("metric inequalities hold on random generations") {
  std::mt19937_64 rng(7);
  const double ln_top_k = std::log(10.0);
  for (int i = 0; i < 2000; ++i) {
    const Generation gen = random_generation(rng);
    const MetricBundle m = compute_metrics(gen);
    REQUIRE(m.entropy >= 0.0);
    REQUIRE(m.entropy <= ln_top_k + 1e-12);
    REQUIRE(m.perplexity >= 1.0 - 1e-12);
    REQUIRE(m.token_probability > 0.0);
    REQUIRE(m.token_probability <= 1.0 + 1e-12);
    // arithmetic mean >= geometric mean of the chosen-token probabilities
    REQUIRE(m.token_probability * m.perplexity >= 1.0 - 1e-9);
  }
}

TEST_CASE("uncertainty moves together as the top probability drops") {
  double prev_h = -1.0;
  double prev_ppl = 0.0;
  double prev_tp = 2.0;
  for (double p : {0.9, 0.7, 0.5}) {
    Generation gen;
    TokenLogprob tok;
    tok.token = "only";
    tok.logprob = std::log(p);
    tok.top_candidates.push_back({"only", std::log(p)});
    tok.top_candidates.push_back({"other", std::log(1.0 - p)});
    gen.tokens.push_back(tok);
    gen.answer_text = "only";

    const MetricBundle m = compute_metrics(gen);
    CHECK(m.entropy > prev_h);
    CHECK(m.perplexity > prev_ppl);
    CHECK(m.token_probability < prev_tp);
    prev_h = m.entropy;
    prev_ppl = m.perplexity;
    prev_tp = m.token_probability;
  }
}

TEST_CASE("aggregate computes mean and sample standard error") {
  const std::vector<double> values{0.9, 1.0, 1.1};
  const AggregateStat stat = aggregate(values);
  CHECK(stat.mean == Catch::Approx(1.0).margin(1e-12));
  CHECK(stat.standard_error == Catch::Approx(0.057735026918963).margin(1e-9));
  CHECK(stat.count == 3);
}

TEST_CASE("aggregate edge cases") {
  const AggregateStat singleton = aggregate(std::vector<double>{0.5});
  CHECK(singleton.mean == 0.5);
  CHECK(singleton.standard_error == 0.0);
  CHECK(singleton.count == 1);

  const AggregateStat constant = aggregate(std::vector<double>{2.0, 2.0, 2.0, 2.0});
  CHECK(constant.mean == 2.0);
  CHECK(constant.standard_error == 0.0);

  CHECK_THROWS_AS(aggregate(std::vector<double>{}), Error);
}

TEST_CASE("aggregate is permutation invariant and scale equivariant") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  std::vector<double> values(17);
  for (double& v : values) {
    v = unit(rng);
  }
  const AggregateStat base = aggregate(values);

  std::vector<double> shuffled = values;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const AggregateStat permuted = aggregate(shuffled);
  CHECK(permuted.mean == Catch::Approx(base.mean).margin(1e-12));
  CHECK(permuted.standard_error == Catch::Approx(base.standard_error).margin(1e-12));

  std::vector<double> scaled = values;
  for (double& v : scaled) {
    v *= 3.5;
  }
  CHECK(aggregate(scaled).mean == Catch::Approx(3.5 * base.mean).margin(1e-12));
}
