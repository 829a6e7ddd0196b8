#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "buddy/common/error.hpp"
#include "buddy/conversation/message.hpp"
#include "buddy/conversation/types.hpp"

namespace buddy {

using Clock = std::chrono::system_clock;

/// Identifies the cache entry a bot turn was served from.
struct CacheRef {
  std::string normalized_query;
  std::uint64_t context = 0;
};

struct Turn {
  Speaker speaker = Speaker::Bot;
  std::string content;
  std::optional<BotMessage> parsed;  // bot turns whose content parsed
  Clock::time_point timestamp{};
  std::optional<ServedFrom> served_from;  // bot turns produced by the pipeline
  std::optional<CacheRef> cache_ref;
  std::optional<Feedback> feedback;
};

/// Soft close after `soft_close_at` user turns, force close at `hard_close_at`.
struct TurnBudget {
  int soft_close_at = 10;
  int hard_close_at = 13;
};

struct Session {
  std::string id;
  std::string topic_id;
  std::string persona = "Buddy";
  TemplateVersion template_version = TemplateVersion::V1;
  std::vector<Turn> turns;
  int off_topic_count = 0;
  SessionState state = SessionState::Open;

  int user_turns() const;
  /// Text of the most recent bot utterance, empty when there is none.
  std::string last_bot_text() const;
};

/// What the policy layer concluded about the user's input.
struct TurnSignals {
  bool off_topic = false;
  bool termination = false;
};

struct BotReply {
  std::string raw;
  BotMessage message;
  std::optional<ServedFrom> served_from;
  std::optional<CacheRef> cache_ref;
};

class SessionClosed : public Error {
 public:
  SessionClosed() : Error("session is closed") {}
};

/// Builds an Open session whose first turn is the topic's opening question.
Session start_session(std::string id, std::string topic_id, std::string persona,
                      TemplateVersion version, const BotMessage& opening,
                      Clock::time_point now = Clock::now());

/// Appends the user turn and the bot reply, then applies the turn budget and
/// closing rules. Returns the stored bot message, whose is_finished is forced
/// true whenever the session closes. Throws SessionClosed on a Closed session.
const BotMessage& advance_session(Session& session, std::string_view user_input, BotReply reply,
                                  const TurnSignals& signals, const TurnBudget& budget = {},
                                  Clock::time_point now = Clock::now());

}  // namespace buddy
