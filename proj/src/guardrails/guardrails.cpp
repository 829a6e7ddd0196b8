#include "buddy/guardrails/guardrails.hpp"

#include <sstream>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"

namespace buddy {

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::istringstream in(text::read_file(path.string()));
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    entries.push_back(line);
  }
  return from_entries(entries, path.string());
}

Lexicon Lexicon::from_entries(const std::vector<std::string>& entries, std::string source) {
  Lexicon lex;
  lex.source_ = std::move(source);
  for (const auto& e : entries) {
    auto n = text::normalize(e);
    if (!n.empty()) lex.entries_.insert(std::move(n));
  }
  if (lex.entries_.empty()) throw ConfigError("lexicon " + lex.source_ + " has no entries");
  return lex;
}

std::string Lexicon::first_match(std::string_view input) const {
  const auto normalized = text::normalize(input);
  if (normalized.empty()) return {};
  for (const auto& e : entries_) {
    if (text::contains_phrase(normalized, e)) return e;
  }
  return {};
}

InputVerdict screen_input(std::string_view user_input, const Lexicon& lex) {
  return lex.first_match(user_input).empty() ? InputVerdict::Clean : InputVerdict::Toxic;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::Lexical: return "Lexical";
    case RejectReason::SentenceCount: return "SentenceCount";
    case RejectReason::WordLength: return "WordLength";
  }
  return "?";
}

OutputVerdict check_output(const BotMessage& msg, const Lexicon& lex, std::size_t max_word_len) {
  if (auto hit = lex.first_match(msg.text); !hit.empty()) return OutputVerdict::reject(RejectReason::Lexical, hit);
  for (const auto& hint : msg.hint_sentences) {
    if (auto hit = lex.first_match(hint); !hit.empty()) return OutputVerdict::reject(RejectReason::Lexical, hit);
  }
  for (const auto& hint : msg.hint_words) {
    if (auto hit = lex.first_match(hint); !hit.empty()) return OutputVerdict::reject(RejectReason::Lexical, hit);
  }
  if (auto n = text::count_sentences(msg.text); n > 2) {
    return OutputVerdict::reject(RejectReason::SentenceCount, std::to_string(n) + " sentences");
  }
  for (const auto& w : text::words(text::normalize(msg.text))) {
    if (text::codepoint_length(w) > max_word_len) return OutputVerdict::reject(RejectReason::WordLength, w);
  }
  return OutputVerdict::accept();
}

}  // namespace buddy
