#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "driftbench/error.hpp"

namespace driftbench {

struct TokenCandidate {
  std::string token;
  double logprob = 0.0;  // natural log, <= 0
};

// One generated token: the chosen token's logprob plus the top candidate
// distribution reported by the backend at that position. Candidates are
// sorted by logprob descending and their probabilities sum to at most 1.
struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  std::vector<TokenCandidate> top_candidates;
};

struct Generation {
  std::string answer_text;
  std::vector<TokenLogprob> tokens;
  std::string model_spec_id;
};

struct MetricBundle {
  double entropy = 0.0;            // nats, >= 0
  double perplexity = 1.0;         // >= 1
  double token_probability = 1.0;  // in (0, 1]
};

struct AggregateStat {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

// Mean per-position entropy over the reported top candidates, in nats.
// The candidate mass is used as returned, without renormalization, and
// zero-probability candidates contribute nothing.
inline double sequence_entropy(const Generation& gen) {
  if (gen.tokens.empty()) {
    throw Error("empty generation");
  }
  double total = 0.0;
  for (const TokenLogprob& tok : gen.tokens) {
    if (tok.top_candidates.empty()) {
      throw Error("token without candidates");
    }
    double h = 0.0;
    for (const TokenCandidate& cand : tok.top_candidates) {
      double p = std::exp(cand.logprob);
      if (p > 0.0) {
        h -= p * cand.logprob;
      }
    }
    total += h;
  }
  return total / static_cast<double>(gen.tokens.size());
}

// exp of the negative mean chosen-token logprob.
inline double sequence_perplexity(const Generation& gen) {
  if (gen.tokens.empty()) {
    throw Error("empty generation");
  }
  double sum_logprob = 0.0;
  for (const TokenLogprob& tok : gen.tokens) {
    sum_logprob += tok.logprob;
  }
  return std::exp(-sum_logprob / static_cast<double>(gen.tokens.size()));
}

// Arithmetic mean of the chosen-token probabilities.
inline double sequence_token_probability(const Generation& gen) {
  if (gen.tokens.empty()) {
    throw Error("empty generation");
  }
  double sum_prob = 0.0;
  for (const TokenLogprob& tok : gen.tokens) {
    sum_prob += std::exp(tok.logprob);
  }
  return sum_prob / static_cast<double>(gen.tokens.size());
}

inline MetricBundle compute_metrics(const Generation& gen) {
  return MetricBundle{
      .entropy = sequence_entropy(gen),
      .perplexity = sequence_perplexity(gen),
      .token_probability = sequence_token_probability(gen),
  };
}

// Mean and standard error (sample standard deviation / sqrt(n)).
inline AggregateStat aggregate(std::span<const double> values) {
  if (values.empty()) {
    throw Error("no values");
  }
  const std::size_t n = values.size();
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  const double mean = sum / static_cast<double>(n);
  double se = 0.0;
  if (n > 1) {
    double ss = 0.0;
    for (double v : values) {
      const double d = v - mean;
      ss += d * d;
    }
    if (ss < 0.0) {
      ss = 0.0;
    }
    se = std::sqrt(ss / static_cast<double>(n - 1)) /
         std::sqrt(static_cast<double>(n));
  }
  return AggregateStat{.mean = mean, .standard_error = se, .count = n};
}

inline AggregateStat aggregate(const std::vector<double>& values) {
  return aggregate(std::span<const double>(values));
}

}  // namespace driftbench
