#include "driftbench/correctness.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <string>
#include <vector>

using namespace driftbench;

TEST_CASE("normalize collapses whitespace and strips boundary punctuation") {
  CHECK(normalize("  Chicago,  Illinois ") == "chicago, illinois");
  CHECK(normalize("CHICAGO") == "chicago");
  CHECK(normalize("") == "");
  CHECK(normalize("  \t \n ") == "");
  CHECK(normalize("\"Hamlet\".") == "hamlet");
  CHECK(normalize("(Tokyo)") == "tokyo");
  CHECK(normalize("2001: A Space Odyssey") == "2001: a space odyssey");
}

TEST_CASE("normalize folds common unicode punctuation and width forms") {
  CHECK(normalize("“Chicago”") == "chicago");        // curly double quotes
  CHECK(normalize("O’Brien") == "o'brien");               // curly apostrophe
  CHECK(normalize("Tokyo Station") == "tokyo station");   // no-break space
  CHECK(normalize("ＡＢＣ") == "abc");             // fullwidth letters
  CHECK(normalize("cafÉ") == "café");                // Latin-1 case fold
}

TEST_CASE("containment rule accepts verbose but correct answers") {
  const AnswerKey chicago{{"Chicago"}};
  CHECK(is_correct(chicago, "Chicago, Illinois"));
  CHECK(is_correct(AnswerKey{{"chicago"}}, "CHICAGO, Illinois."));
  CHECK_FALSE(is_correct(AnswerKey{{"Stanley Kubrick"}}, "Alfred Hitchcock"));
}

TEST_CASE("empty responses are always incorrect") {
  const AnswerKey key{{"anything"}};
  CHECK_FALSE(is_correct(key, ""));
  CHECK_FALSE(is_correct(key, "   "));
  CHECK_FALSE(is_correct(key, "..."));
}

TEST_CASE("verbatim alias responses are always correct") {
  const std::vector<std::string> aliases{"Stanley Kubrick", "H2O", "42", "The Nile"};
  for (const std::string& alias : aliases) {
    CHECK(is_correct(AnswerKey{{alias}}, alias));
  }
}

TEST_CASE("correctness is invariant under case and outer whitespace changes") {
  const AnswerKey key{{"Mount Everest"}};
  CHECK(is_correct(key, "mount everest"));
  CHECK(is_correct(key, "  MOUNT EVEREST  "));
  CHECK(is_correct(key, "Mount   Everest"));
  CHECK(is_correct(key, "\tMount Everest.\n"));
}

TEST_CASE("adding aliases never flips a correct result") {
  AnswerKey key{{"Paris"}};
  const std::string response = "The capital is Paris.";
  REQUIRE(is_correct(key, response));
  key.aliases.push_back("City of Light");
  key.aliases.push_back("unrelated");
  CHECK(is_correct(key, response));
}

TEST_CASE("interior punctuation stays significant") {
  const AnswerKey key{{"2001: A Space Odyssey"}};
  CHECK(is_correct(key, "It is 2001: A Space Odyssey"));
  CHECK_FALSE(is_correct(key, "2001 A Space Odyssey"));  // colon missing
}
