#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace buddy {

inline constexpr std::size_t kHintSentenceCount = 3;
inline constexpr std::size_t kHintWordCount = 4;
inline constexpr std::size_t kMaxBotSentences = 2;
inline constexpr std::string_view kEndMarker = "<end>";

/// One bot turn as carried on the wire.
struct BotMessage {
  std::string text;
  std::vector<std::string> hint_sentences;
  std::vector<std::string> hint_words;
  bool is_finished = false;

  friend bool operator==(const BotMessage&, const BotMessage&) = default;
};

void to_json(nlohmann::json& j, const BotMessage& m);
/// Strict: throws nlohmann::json exceptions on missing/mistyped fields.
void from_json(const nlohmann::json& j, BotMessage& m);

enum class MessageErrorKind { Parse, Schema, Length };

struct MessageError {
  MessageErrorKind kind;
  std::string detail;
};

std::string_view to_string(MessageErrorKind kind);

struct ParseOutcome {
  std::optional<BotMessage> message;
  std::optional<MessageError> error;
  /// `<end>` appeared somewhere in the raw completion.
  bool end_marker = false;

  bool ok() const { return message.has_value(); }
};

/// Extracts and validates the first well-formed JSON object in a completion.
/// Never throws: arbitrary bytes yield either a message or a typed error.
/// A `<end>` anywhere forces is_finished and is removed from the text.
ParseOutcome parse_bot_message(std::string_view raw);

/// Returns the byte range [first, last) of the first well-formed JSON object
/// in `raw`, if any.
std::optional<std::pair<std::size_t, std::size_t>> find_json_object(std::string_view raw);

}  // namespace buddy
