#include "driftbench/dataset.hpp"

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace driftbench;
namespace dt = driftbench::testing;

namespace {
const std::filesystem::path kSampleCorpus =
    std::filesystem::path(DRIFTBENCH_DATA_DIR) / "sample_corpus.jsonl";
}

TEST_CASE("bundled sample corpus loads cleanly") {
  const std::vector<QAItem> items = load_corpus(kSampleCorpus);
  REQUIRE(items.size() == 20);
  CHECK(items.front().id == "kubrick-2001");
  CHECK(items.front().question == "Who directed 2001: A Space Odyssey?");
  CHECK(items.front().answer_key.aliases.front() == "Stanley Kubrick");
  CHECK(validate_corpus(items).empty());

  const bool has_rambo = std::any_of(items.begin(), items.end(), [](const QAItem& item) {
    return item.question == "What's Rambo's first name?";
  });
  CHECK(has_rambo);
}

TEST_CASE("load then serialize round-trips the sample corpus byte-identically") {
  const std::vector<QAItem> items = load_corpus(kSampleCorpus);
  const std::string serialized = serialize_corpus(items);
  CHECK(serialized == dt::read_file(kSampleCorpus));
}

TEST_CASE("items come back in file order") {
  std::istringstream in(
      R"({"id":"a","question":"Q1?","answers":["x"],"false_fact":"F y.","random_fact":"R."}
{"id":"b","question":"Q2?","answers":["y"],"false_fact":"F x.","random_fact":"R."}
{"id":"c","question":"Q3?","answers":["z"],"false_fact":"F w.","random_fact":"R."}
)");
  const std::vector<QAItem> items = parse_corpus(in);
  REQUIRE(items.size() == 3);
  CHECK(items[0].id == "a");
  CHECK(items[1].id == "b");
  CHECK(items[2].id == "c");
}

TEST_CASE("malformed records fail with the offending line number") {
  std::istringstream in(
      R"({"id":"a","question":"Q?","answers":["x"],"false_fact":"F.","random_fact":"R."}
{"id":"b","question":"Q?" broken
)");
  try {
    parse_corpus(in);
    FAIL("expected ParseError");
  } catch (const ParseError& ex) {
    CHECK(ex.line() == 2);
    CHECK(std::string(ex.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("missing fields are parse errors") {
  std::istringstream in(R"({"id":"a","question":"Q?","answers":["x"]})");
  CHECK_THROWS_AS(parse_corpus(in), ParseError);
}

TEST_CASE("duplicate ids are reported with both positions") {
  std::vector<QAItem> items{
      dt::make_item("dup", "Q1?", {"a1"}, "F one.", "R."),
      dt::make_item("dup", "Q2?", {"a2"}, "F two.", "R."),
      dt::make_item("ok", "Q3?", {"a3"}, "F three.", "R."),
  };
  const auto issues = validate_corpus(items);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == "duplicate-id");
  CHECK(issues[0].message.find("1") != std::string::npos);
  CHECK(issues[0].message.find("2") != std::string::npos);
}

TEST_CASE("answer leakage into the false fact is a validation error") {
  std::vector<QAItem> items{
      dt::make_item("leak", "Who directed it?", {"Stanley Kubrick"},
                    "Stanley Kubrick directed something else.", "R."),
  };
  const auto issues = validate_corpus(items);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].code == "answer-leak");
  CHECK(issues[0].item_id == "leak");
}

TEST_CASE("empty fields are collected, not thrown") {
  std::vector<QAItem> items{
      dt::make_item("e1", "Q?", {"a"}, "F.", ""),
      dt::make_item("e2", "", {"a"}, "F.", "R."),
  };
  const auto issues = validate_corpus(items);
  CHECK(issues.size() == 2);
}

TEST_CASE("validation is order independent") {
  std::vector<QAItem> items{
      dt::make_item("dup", "Q1?", {"a1"}, "F one.", "R."),
      dt::make_item("x", "", {"a2"}, "F two.", "R."),
      dt::make_item("dup", "Q3?", {"a3"}, "F three.", "R."),
      dt::make_item("y", "Q4?", {"leak"}, "The answer leaks here.", "R."),
  };
  auto codes_of = [](const std::vector<ValidationIssue>& issues) {
    std::vector<std::string> codes;
    for (const auto& issue : issues) {
      codes.push_back(issue.code + "/" + issue.item_id);
    }
    std::sort(codes.begin(), codes.end());
    return codes;
  };
  const auto base = codes_of(validate_corpus(items));
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(items.begin(), items.end(), rng);
    CHECK(codes_of(validate_corpus(items)) == base);
  }
}

TEST_CASE("load_corpus rejects invalid corpora naming the item") {
  dt::TempDir dir("dataset");
  const auto path = dir.path() / "bad.jsonl";
  dt::write_file(path,
                 R"({"id":"leaky","question":"Q?","answers":["Lyon"],"false_fact":"Lyon is the answer.","random_fact":"R."}
)");
  try {
    load_corpus(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& ex) {
    CHECK(std::string(ex.what()).find("leaky") != std::string::npos);
  }
}

TEST_CASE("missing corpus file is an io error") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), IoError);
}
