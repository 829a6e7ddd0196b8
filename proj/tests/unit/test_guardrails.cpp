#include <doctest.h>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"
#include "buddy/guardrails/guardrails.hpp"
#include "test_support.hpp"

using namespace buddy;

namespace {

const Lexicon& shipped() {
  static const Lexicon lex = Lexicon::load(testing::data_dir() / "lexicon.txt");
  return lex;
}

BotMessage msg(std::string text) { return BotMessage{std::move(text), {"Yes.", "No.", "Maybe."}, {"a", "b", "c", "d"}}; }

}  // namespace

TEST_CASE("lexicon loading") {
  CHECK(shipped().entries().count("fuck you") == 1);
  for (const auto& e : shipped().entries()) {
    CHECK_FALSE(e.empty());
    CHECK(e == text::normalize(e));
  }
  CHECK_THROWS_AS(Lexicon::from_entries({"", "  ", "!!"}), ConfigError);
  CHECK_THROWS_AS(Lexicon::load("/nonexistent/lexicon.txt"), ConfigError);
  const auto lex = Lexicon::from_entries({"  Bad WORD ", "x"});
  CHECK(lex.entries().count("bad word") == 1);
}

TEST_CASE("screen_input") {
  // Final user line of the Response to Toxicity case.
  CHECK(screen_input("fuck you!", shipped()) == InputVerdict::Toxic);
  CHECK(screen_input("I like sunny days", shipped()) == InputVerdict::Clean);
  CHECK(screen_input("SUNNY!!", shipped()) == InputVerdict::Clean);
  CHECK(screen_input("You are STUPID.", shipped()) == InputVerdict::Toxic);
  CHECK(screen_input("", shipped()) == InputVerdict::Clean);
  // Whole words only.
  CHECK(screen_input("I killed time with a skill game", Lexicon::from_entries({"kill"})) == InputVerdict::Clean);
}

TEST_CASE("check_output") {
  CHECK(check_output(msg("It is sunny. Do you like sunny days?"), shipped()).ok);
  const auto three = check_output(msg("It is sunny. It is warm. Do you like it?"), shipped());
  CHECK_FALSE(three.ok);
  CHECK(three.reason == RejectReason::SentenceCount);
  const auto lexical = check_output(msg("You are stupid."), shipped());
  CHECK_FALSE(lexical.ok);
  CHECK(lexical.reason == RejectReason::Lexical);
  const auto long_word = check_output(msg("That is incomprehensible."), shipped());
  CHECK_FALSE(long_word.ok);
  CHECK(long_word.reason == RejectReason::WordLength);
  CHECK(check_output(msg("That is incomprehensible."), shipped(), 20).ok);
  auto bad_hint = msg("Hello.");
  bad_hint.hint_words[2] = "beer";
  CHECK(check_output(bad_hint, shipped()).reason == RejectReason::Lexical);
  CHECK(to_string(RejectReason::WordLength) == "WordLength");
}

TEST_CASE("shipped fallback lines pass the output checks") {
  const auto doc = nlohmann::json::parse(text::read_file((testing::data_dir() / "topics.json").string()));
  for (const auto& t : doc.at("topics")) {
    CHECK(check_output(msg(t.at("fallback_line").get<std::string>()), shipped()).ok);
  }
}
