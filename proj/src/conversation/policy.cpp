#include "buddy/conversation/policy.hpp"

#include <stdexcept>

#include "buddy/common/text.hpp"

namespace buddy {
namespace {

// Words too common to tell one topic from another.
const std::set<std::string>& function_words() {
  static const std::set<std::string> words = {
      "a",    "about", "am",   "an",   "and",  "are",  "at",   "be",   "but",  "can",
      "do",   "does",  "dont", "for",  "from", "have", "he",   "how",  "hows", "i",
      "im",   "in",    "is",   "it",   "its",  "like", "me",   "my",   "not",  "of",
      "on",   "or",    "she",  "that", "the",  "there", "they", "this", "to",  "too",
      "we",   "what",  "whats", "with", "you", "your", "yes",  "no",   "so",   "very",
  };
  return words;
}

}  // namespace

TerminationLexicon TerminationLexicon::defaults() {
  TerminationLexicon lex;
  for (auto p : {"bye", "goodbye", "stop", "i want stop", "quit", "close"}) lex.add(p);
  return lex;
}

void TerminationLexicon::add(std::string_view phrase) {
  auto norm = text::normalize(phrase);
  if (norm.empty()) throw std::invalid_argument("termination phrase is empty after normalization");
  phrases_.insert(std::move(norm));
}

bool TerminationLexicon::matches(std::string_view user_input) const {
  const auto norm = text::normalize(user_input);
  for (const auto& p : phrases_) {
    if (text::contains_phrase(norm, p)) return true;
  }
  return false;
}

bool detect_termination_intent(std::string_view user_input, const TerminationLexicon& lexicon) {
  return lexicon.matches(user_input);
}

std::set<std::string> topic_keywords(const Topic& topic) {
  std::set<std::string> out;
  auto collect = [&](std::string_view s) {
    for (auto& w : text::words(text::normalize(s))) {
      if (w.size() >= 3 && !function_words().count(w)) out.insert(std::move(w));
    }
  };
  collect(topic.objective);
  for (const auto& e : topic.key_expressions) collect(e);
  return out;
}

double OffTopicDetector::similarity(std::string_view user_input, const Topic& topic) const {
  std::string reference = topic.objective;
  for (const auto& e : topic.key_expressions) reference += " " + e;
  return cosine(embedder_.embed(text::normalize(user_input)), embedder_.embed(text::normalize(reference)));
}

bool OffTopicDetector::is_off_topic(std::string_view user_input, const Topic& topic, double threshold) const {
  if (threshold < 0.0 || threshold > 1.0) throw std::invalid_argument("threshold must lie in [0, 1]");
  const auto keywords = topic_keywords(topic);
  for (const auto& w : text::words(text::normalize(user_input))) {
    if (keywords.count(w)) return false;
  }
  return similarity(user_input, topic) < threshold;
}

std::string build_redirect_directive(const Topic& topic, std::string_view user_input) {
  const auto said = text::flatten_for_transcript(user_input);
  const std::string ack = said.empty() ? "that" : "\"" + said + "\"";
  return "### System: The user said something that is not about the topic. Briefly acknowledge " + ack +
         " in a kind way, then gently steer the conversation back to the topic (" + topic.title +
         "): " + topic.objective + ". End with a simple question about " + text::to_lower(topic.title) +
         ".\n";
}

std::string build_deescalation_directive(const Topic& topic) {
  return "### System: The user used rude or unkind words. Stay calm: say that you feel sad or that you "
         "do not understand, do not repeat the words, then continue the conversation about " +
         text::to_lower(topic.title) + ".\n";
}

std::string build_closing_directive() {
  return "### System: The user wants to end the conversation. Say goodbye kindly in one short sentence "
         "and set true to `is_finished`.\n";
}

std::string build_wrap_up_directive(const Topic& topic) {
  return "### System: The conversation is almost over. Start to wrap up the talk about " +
         text::to_lower(topic.title) + " and ask if the user wants to say anything more.\n";
}

}  // namespace buddy
