#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "buddy/cache/embedding.hpp"
#include "buddy/conversation/topic.hpp"

namespace buddy {

/// Phrases that signal the learner wants to stop. Matched as whole words or
/// phrases against the normalized input.
class TerminationLexicon {
 public:
  /// bye, goodbye, stop, i want stop, quit, close
  static TerminationLexicon defaults();

  void add(std::string_view phrase);
  bool matches(std::string_view user_input) const;
  const std::set<std::string>& phrases() const { return phrases_; }

 private:
  std::set<std::string> phrases_;
};

bool detect_termination_intent(std::string_view user_input,
                               const TerminationLexicon& lexicon = TerminationLexicon::defaults());

/// Content words of the objective and key expressions (function words removed).
std::set<std::string> topic_keywords(const Topic& topic);

class OffTopicDetector {
 public:
  explicit OffTopicDetector(const Embedder& embedder) : embedder_(embedder) {}

  /// Cosine between the normalized input and the normalized objective plus
  /// key expressions.
  double similarity(std::string_view user_input, const Topic& topic) const;

  /// True iff similarity < threshold and no topic keyword occurs in the input.
  bool is_off_topic(std::string_view user_input, const Topic& topic, double threshold) const;

 private:
  const Embedder& embedder_;
};

/// `### System:` line asking the model to acknowledge the remark and return
/// to the objective. Byte-identical for equal arguments.
std::string build_redirect_directive(const Topic& topic, std::string_view user_input);

/// `### System:` line asking for a calm reply to rude input, then continuing.
std::string build_deescalation_directive(const Topic& topic);

/// `### System:` line asking for a goodbye with is_finished set.
std::string build_closing_directive();

/// `### System:` line asking the model to start wrapping up.
std::string build_wrap_up_directive(const Topic& topic);

}  // namespace buddy
