#include <doctest.h>

#include <fstream>

#include "buddy/common/append_log.hpp"
#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"
#include "test_support.hpp"

using namespace buddy;

TEST_CASE("normalize lowercases, strips punctuation and collapses spaces") {
  CHECK(text::normalize("SUNNY!!") == "sunny");
  CHECK(text::normalize("  Hi,   what's the WEATHER like?  ") == "hi whats the weather like");
  CHECK(text::normalize("It\xE2\x80\x99s sunny") == "its sunny");
  CHECK(text::normalize("") == "");
  CHECK(text::normalize("...") == "");
  CHECK(text::normalize("caf\xC3\xA9 time") == "caf\xC3\xA9 time");
}

TEST_CASE("normalize is idempotent on awkward input") {
  for (const char* s : {"A--B", "x\ty\nz", "'quoted'", "\xE2\x80\x99", "a.b.c", "   "}) {
    const auto once = text::normalize(s);
    CHECK(text::normalize(once) == once);
  }
}

TEST_CASE("contains_phrase respects word boundaries") {
  CHECK(text::contains_phrase("i want stop now", "i want stop"));
  CHECK(text::contains_phrase("bye", "bye"));
  CHECK_FALSE(text::contains_phrase("goodbye", "bye"));
  CHECK_FALSE(text::contains_phrase("stopwatch", "stop"));
  CHECK(text::contains_phrase("a stop b", "stop"));
  CHECK_FALSE(text::contains_phrase("anything", ""));
}

TEST_CASE("count_sentences") {
  CHECK(text::count_sentences("It is sunny. Do you like sunny days?") == 2);
  CHECK(text::count_sentences("One. Two. Three.") == 3);
  CHECK(text::count_sentences("No terminal punctuation") == 1);
  CHECK(text::count_sentences("") == 0);
  CHECK(text::count_sentences("It's 3.5 degrees.") == 1);
  CHECK(text::count_sentences("Wow!!! Great?!") == 2);
  CHECK(text::count_sentences("... !") == 0);
}

TEST_CASE("codepoint_length counts UTF-8 characters") {
  CHECK(text::codepoint_length("abc") == 3);
  CHECK(text::codepoint_length("\xEC\x95\x88\xEB\x85\x95") == 2);
}

TEST_CASE("flatten_for_transcript removes block markers and newlines") {
  CHECK(text::flatten_for_transcript("a\n### User: b") == "a ## User: b");
  CHECK(text::flatten_for_transcript("####") == "##");
  CHECK(text::flatten_for_transcript("  plain  ") == "plain");
}

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(text::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("read_file throws ConfigError for a missing file") {
  CHECK_THROWS_AS(text::read_file("/nonexistent/buddy/file"), ConfigError);
}

TEST_CASE("AppendLog round-trips records and drops a torn tail") {
  testing::TempDir dir("log");
  const auto path = dir.path() / "sub" / "x.log";
  const AppendLog::Magic magic = {'T', 'E', 'S', 'T'};
  {
    AppendLog log(path, magic, 3);
    CHECK(log.replayed().empty());
    log.append("one");
    log.append("");
    log.append(std::string(1000, 'z'));
  }
  const auto intact = std::filesystem::file_size(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.write("\x10\x00\x00\x00par", 7);  // length says 16, only 3 bytes follow
  }
  {
    AppendLog log(path, magic, 3);
    REQUIRE(log.replayed().size() == 3);
    CHECK(log.replayed()[0] == "one");
    CHECK(log.replayed()[1].empty());
    CHECK(log.replayed()[2].size() == 1000);
    CHECK(std::filesystem::file_size(path) == intact);
    log.append("four");
  }
  AppendLog again(path, magic, 3);
  REQUIRE(again.replayed().size() == 4);
  CHECK(again.replayed()[3] == "four");

  CHECK_THROWS_AS(AppendLog(path, AppendLog::Magic{'N', 'O', 'P', 'E'}, 3), ConfigError);
  CHECK_THROWS_AS(AppendLog(path, magic, 4), ConfigError);
}
