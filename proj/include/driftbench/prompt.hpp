#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "driftbench/dataset.hpp"
#include "driftbench/error.hpp"

namespace driftbench {

enum class ConditionKind { Baseline, FalseInfo, RandomInfo };
enum class Variant { V1, V2 };

struct PromptCondition {
  ConditionKind kind = ConditionKind::Baseline;
  int repetitions = 0;  // fact repetitions k: 0 for baseline, 1 for RIP, >= 1 for FIP
  Variant variant = Variant::V1;

  static PromptCondition baseline(Variant v) { return {ConditionKind::Baseline, 0, v}; }
  static PromptCondition false_info(int k, Variant v) {
    return {ConditionKind::FalseInfo, k, v};
  }
  static PromptCondition random_info(Variant v) { return {ConditionKind::RandomInfo, 1, v}; }

  bool operator==(const PromptCondition&) const = default;
};

enum class ComponentLabel { Fact, Question, Instruction };

struct ComponentSpan {
  ComponentLabel label;
  std::size_t start = 0;  // byte offsets into PromptText::text, [start, end)
  std::size_t end = 0;
};

struct PromptText {
  std::string text;
  std::vector<ComponentSpan> components;
};

inline std::string_view instruction_for(Variant variant) {
  switch (variant) {
    case Variant::V1:
      return "Respond with the exact answer only.";
    case Variant::V2:
      return "Respond with the true, exact answer only.";
  }
  throw Error("unknown instruction variant");
}

// Assembles the prompt: the fact statement repeated k times (FIP) or once
// (RIP), the question, then the instruction sentence, newline-separated.
// No "False Information:"-style labels are ever emitted.
inline PromptText build_prompt(const QAItem& item, const PromptCondition& cond) {
  if (item.question.empty()) {
    throw ValidationError("invalid item: empty question");
  }
  int fact_count = 0;
  const std::string* fact = nullptr;
  switch (cond.kind) {
    case ConditionKind::Baseline:
      break;
    case ConditionKind::FalseInfo:
      if (cond.repetitions < 1) {
        throw ValidationError("false-info condition requires k >= 1");
      }
      if (item.false_fact.empty()) {
        throw ValidationError("missing fact: item \"" + item.id + "\" has no false_fact");
      }
      fact = &item.false_fact;
      fact_count = cond.repetitions;
      break;
    case ConditionKind::RandomInfo:
      if (item.random_fact.empty()) {
        throw ValidationError("missing fact: item \"" + item.id + "\" has no random_fact");
      }
      fact = &item.random_fact;
      fact_count = 1;
      break;
  }

  PromptText prompt;
  auto append_component = [&prompt](ComponentLabel label, std::string_view text) {
    if (!prompt.text.empty()) {
      prompt.text.push_back('\n');
    }
    const std::size_t start = prompt.text.size();
    prompt.text.append(text);
    prompt.components.push_back({label, start, prompt.text.size()});
  };
  for (int i = 0; i < fact_count; ++i) {
    append_component(ComponentLabel::Fact, *fact);
  }
  append_component(ComponentLabel::Question, item.question);
  append_component(ComponentLabel::Instruction, instruction_for(cond.variant));
  return prompt;
}

inline std::string variant_name(Variant v) { return v == Variant::V1 ? "v1" : "v2"; }

// Display name matching the reported tables: B, RIP, FIP, FIPx2, ...
inline std::string condition_name(const PromptCondition& cond) {
  switch (cond.kind) {
    case ConditionKind::Baseline:
      return "B";
    case ConditionKind::RandomInfo:
      return "RIP";
    case ConditionKind::FalseInfo:
      return cond.repetitions == 1 ? "FIP" : "FIPx" + std::to_string(cond.repetitions);
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "v1" || s == "V1") {
    return Variant::V1;
  }
  if (s == "v2" || s == "V2") {
    return Variant::V2;
  }
  throw UsageError("unknown variant \"" + std::string(s) + "\" (expected v1 or v2)");
}

// Parses one condition token: "b" | "fip" | "fip:k" | "rip".
inline PromptCondition parse_condition(std::string_view token, Variant variant) {
  if (token == "b" || token == "B") {
    return PromptCondition::baseline(variant);
  }
  if (token == "rip" || token == "RIP") {
    return PromptCondition::random_info(variant);
  }
  if (token == "fip" || token == "FIP") {
    return PromptCondition::false_info(1, variant);
  }
  if (token.starts_with("fip:") || token.starts_with("FIP:")) {
    const std::string k_str(token.substr(4));
    int k = 0;
    try {
      std::size_t consumed = 0;
      k = std::stoi(k_str, &consumed);
      if (consumed != k_str.size()) {
        k = 0;
      }
    } catch (const std::exception&) {
      k = 0;
    }
    if (k < 1) {
      throw UsageError("bad repetition count in condition \"" + std::string(token) + "\"");
    }
    return PromptCondition::false_info(k, variant);
  }
  throw UsageError("unknown condition \"" + std::string(token) +
                   "\" (expected b, fip, fip:k, or rip)");
}

inline std::vector<PromptCondition> parse_condition_list(std::string_view csv,
                                                         Variant variant) {
  std::vector<PromptCondition> conditions;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    if (comma == std::string_view::npos) {
      comma = csv.size();
    }
    std::string_view token = csv.substr(start, comma - start);
    if (!token.empty()) {
      conditions.push_back(parse_condition(token, variant));
    }
    start = comma + 1;
  }
  if (conditions.empty()) {
    throw UsageError("empty condition list");
  }
  return conditions;
}

}  // namespace driftbench
