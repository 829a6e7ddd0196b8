#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace buddy {

/// One textbook dialogue task.
struct Topic {
  std::string id;
  std::string title;
  std::string objective;
  std::vector<std::string> key_expressions;
  std::string opening_line;
  std::vector<std::string> opening_hint_sentences;  // exactly 3
  std::vector<std::string> opening_hint_words;      // exactly 4
  std::string fallback_line;
};

/// Immutable, ordered set of the seven shipped topics.
class TopicCatalog {
 public:
  static constexpr std::size_t kTopicCount = 7;

  static TopicCatalog load(const std::filesystem::path& path);
  static TopicCatalog parse(std::string_view json_text);

  const std::vector<Topic>& topics() const { return topics_; }
  const Topic* find(std::string_view id) const;

 private:
  std::vector<Topic> topics_;
};

}  // namespace buddy
