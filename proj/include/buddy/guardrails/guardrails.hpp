#pragma once

#include <filesystem>
#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "buddy/conversation/message.hpp"

namespace buddy {

/// Normalized terms and phrases. Immutable once built.
class Lexicon {
 public:
  /// One entry per line, `#` starts a comment. Throws ConfigError on a missing
  /// file or when no entry survives.
  static Lexicon load(const std::filesystem::path& path);
  /// Throws ConfigError if nothing survives normalization.
  static Lexicon from_entries(const std::vector<std::string>& entries, std::string source = "<inline>");

  const std::set<std::string>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  /// First entry found in `text` as a whole word/phrase, or empty.
  std::string first_match(std::string_view text) const;

 private:
  std::set<std::string> entries_;
  std::string source_;
};

enum class InputVerdict { Clean, Toxic };

InputVerdict screen_input(std::string_view user_input, const Lexicon& lex);

enum class RejectReason { Lexical, SentenceCount, WordLength };

std::string_view to_string(RejectReason reason);

struct OutputVerdict {
  bool ok = true;
  RejectReason reason = RejectReason::Lexical;
  std::string detail;

  static OutputVerdict accept() { return {}; }
  static OutputVerdict reject(RejectReason r, std::string detail) { return {false, r, std::move(detail)}; }
};

inline constexpr std::size_t kDefaultMaxWordLength = 12;

/// Checks the text (and hints) for lexicon hits; the text alone for the
/// two-sentence cap and the longest word.
OutputVerdict check_output(const BotMessage& msg, const Lexicon& lex,
                           std::size_t max_word_len = kDefaultMaxWordLength);

}  // namespace buddy
