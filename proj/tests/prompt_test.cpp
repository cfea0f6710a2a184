#include "driftbench/prompt.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <string>

#include "test_support.hpp"

using namespace driftbench;
namespace dt = driftbench::testing;

namespace {

int count_occurrences(const std::string& haystack, const std::string& needle) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("instruction sentences are pinned byte-for-byte") {
  CHECK(instruction_for(Variant::V1) == "Respond with the exact answer only.");
  CHECK(instruction_for(Variant::V2) == "Respond with the true, exact answer only.");
  CHECK(instruction_for(Variant::V1) != instruction_for(Variant::V2));
}

TEST_CASE("false-info prompt matches the golden string") {
  const QAItem item = dt::kubrick_item();
  const PromptText prompt = build_prompt(item, PromptCondition::false_info(1, Variant::V1));
  CHECK(prompt.text ==
        "Alfred Hitchcock directed 2001: A Space Odyssey.\n"
        "Who directed 2001: A Space Odyssey?\n"
        "Respond with the exact answer only.");
}

TEST_CASE("baseline prompt omits the fact component") {
  const QAItem item = dt::kubrick_item();
  const PromptText prompt = build_prompt(item, PromptCondition::baseline(Variant::V1));
  CHECK(prompt.text ==
        "Who directed 2001: A Space Odyssey?\n"
        "Respond with the exact answer only.");
  REQUIRE(prompt.components.size() == 2);
  CHECK(prompt.components[0].label == ComponentLabel::Question);
  CHECK(prompt.components[1].label == ComponentLabel::Instruction);
}

TEST_CASE("fact repetition count is exact") {
  const QAItem item = dt::kubrick_item();
  for (int k : {1, 2, 3, 5, 10}) {
    const PromptText prompt =
        build_prompt(item, PromptCondition::false_info(k, Variant::V2));
    CHECK(count_occurrences(prompt.text, item.false_fact) == k);
    CHECK(count_occurrences(prompt.text, item.question) == 1);
  }
  const PromptText baseline = build_prompt(item, PromptCondition::baseline(Variant::V1));
  CHECK(count_occurrences(baseline.text, item.false_fact) == 0);
  CHECK(count_occurrences(baseline.text, item.random_fact) == 0);
}

TEST_CASE("random-info prompt injects the random fact once") {
  const QAItem item = dt::kubrick_item();
  const PromptText prompt = build_prompt(item, PromptCondition::random_info(Variant::V2));
  CHECK(prompt.text ==
        "In the 1960s, video recorders were first developed.\n"
        "Who directed 2001: A Space Odyssey?\n"
        "Respond with the true, exact answer only.");
  CHECK(count_occurrences(prompt.text, item.random_fact) == 1);
  CHECK(count_occurrences(prompt.text, item.false_fact) == 0);
}

TEST_CASE("prompt construction is deterministic") {
  const QAItem item = dt::kubrick_item();
  const PromptCondition cond = PromptCondition::false_info(5, Variant::V2);
  const PromptText a = build_prompt(item, cond);
  const PromptText b = build_prompt(item, cond);
  CHECK(a.text == b.text);
  REQUIRE(a.components.size() == b.components.size());
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    CHECK(a.components[i].start == b.components[i].start);
    CHECK(a.components[i].end == b.components[i].end);
  }
}

TEST_CASE("spans are ordered, disjoint, and cover all non-separator text") {
  const QAItem item = dt::kubrick_item();
  for (const PromptCondition& cond :
       {PromptCondition::baseline(Variant::V1), PromptCondition::false_info(3, Variant::V1),
        PromptCondition::random_info(Variant::V2)}) {
    const PromptText prompt = build_prompt(item, cond);
    std::size_t expected_start = 0;
    for (const ComponentSpan& span : prompt.components) {
      CHECK(span.start == expected_start);
      CHECK(span.end > span.start);
      expected_start = span.end + 1;  // single newline separator
    }
    CHECK(prompt.components.back().end == prompt.text.size());
  }
}

TEST_CASE("instruction is always the final component") {
  const QAItem item = dt::kubrick_item();
  for (const PromptCondition& cond :
       {PromptCondition::baseline(Variant::V2), PromptCondition::false_info(10, Variant::V1),
        PromptCondition::random_info(Variant::V1)}) {
    const PromptText prompt = build_prompt(item, cond);
    const ComponentSpan& last = prompt.components.back();
    CHECK(last.label == ComponentLabel::Instruction);
    CHECK(prompt.text.substr(last.start) == instruction_for(cond.variant));
  }
}

TEST_CASE("V1 and V2 prompts differ only within the instruction span") {
  const QAItem item = dt::kubrick_item();
  const PromptText v1 = build_prompt(item, PromptCondition::false_info(2, Variant::V1));
  const PromptText v2 = build_prompt(item, PromptCondition::false_info(2, Variant::V2));
  const std::size_t v1_start = v1.components.back().start;
  const std::size_t v2_start = v2.components.back().start;
  CHECK(v1_start == v2_start);
  CHECK(v1.text.substr(0, v1_start) == v2.text.substr(0, v2_start));
  CHECK(v1.text.substr(v1_start) != v2.text.substr(v2_start));
}

TEST_CASE("missing facts and empty questions are rejected") {
  QAItem no_false = dt::kubrick_item();
  no_false.false_fact.clear();
  CHECK_THROWS_AS(build_prompt(no_false, PromptCondition::false_info(1, Variant::V1)),
                  ValidationError);

  QAItem no_random = dt::kubrick_item();
  no_random.random_fact.clear();
  CHECK_THROWS_AS(build_prompt(no_random, PromptCondition::random_info(Variant::V1)),
                  ValidationError);

  QAItem no_question = dt::kubrick_item();
  no_question.question.clear();
  CHECK_THROWS_AS(build_prompt(no_question, PromptCondition::baseline(Variant::V1)),
                  ValidationError);
}

TEST_CASE("condition tokens parse and print") {
  CHECK(parse_condition("b", Variant::V1) == PromptCondition::baseline(Variant::V1));
  CHECK(parse_condition("rip", Variant::V2) == PromptCondition::random_info(Variant::V2));
  CHECK(parse_condition("fip", Variant::V1) == PromptCondition::false_info(1, Variant::V1));
  CHECK(parse_condition("fip:10", Variant::V1) ==
        PromptCondition::false_info(10, Variant::V1));
  CHECK_THROWS_AS(parse_condition("fip:0", Variant::V1), UsageError);
  CHECK_THROWS_AS(parse_condition("fip:x", Variant::V1), UsageError);
  CHECK_THROWS_AS(parse_condition("nope", Variant::V1), UsageError);

  const auto conditions = parse_condition_list("b,fip:1,fip:2,fip:5,fip:10", Variant::V1);
  REQUIRE(conditions.size() == 5);
  CHECK(condition_name(conditions[0]) == "B");
  CHECK(condition_name(conditions[1]) == "FIP");
  CHECK(condition_name(conditions[2]) == "FIPx2");
  CHECK(condition_name(conditions[4]) == "FIPx10");
  CHECK(condition_name(PromptCondition::random_info(Variant::V1)) == "RIP");
}
