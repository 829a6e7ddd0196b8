#include "buddy/conversation/session.hpp"

#include <algorithm>

namespace buddy {

int Session::user_turns() const {
  return static_cast<int>(
      std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.speaker == Speaker::User; }));
}

std::string Session::last_bot_text() const {
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->speaker != Speaker::Bot) continue;
    return it->parsed ? it->parsed->text : it->content;
  }
  return {};
}

Session start_session(std::string id, std::string topic_id, std::string persona,
                      TemplateVersion version, const BotMessage& opening, Clock::time_point now) {
  Session s;
  s.id = std::move(id);
  s.topic_id = std::move(topic_id);
  s.persona = std::move(persona);
  s.template_version = version;
  Turn first;
  first.speaker = Speaker::Bot;
  first.content = opening.text;
  first.parsed = opening;
  first.timestamp = now;
  s.turns.push_back(std::move(first));
  return s;
}

const BotMessage& advance_session(Session& session, std::string_view user_input, BotReply reply,
                                  const TurnSignals& signals, const TurnBudget& budget,
                                  Clock::time_point now) {
  if (session.state == SessionState::Closed) throw SessionClosed();

  Turn user;
  user.speaker = Speaker::User;
  user.content = std::string(user_input);
  user.timestamp = now;
  session.turns.push_back(std::move(user));

  if (signals.off_topic) ++session.off_topic_count;
  const int completed = session.user_turns();

  // `<end>` in the raw completion closes even when the object itself failed to parse.
  const bool end_marker = reply.raw.find("<end>") != std::string::npos;
  const bool close = reply.message.is_finished || end_marker || signals.termination ||
                     completed >= budget.hard_close_at;
  if (close) {
    reply.message.is_finished = true;
    session.state = SessionState::Closed;
  } else if (completed >= budget.soft_close_at) {
    session.state = SessionState::SoftClosing;
  }

  Turn bot;
  bot.speaker = Speaker::Bot;
  bot.content = std::move(reply.raw);
  bot.parsed = std::move(reply.message);
  bot.timestamp = now;
  bot.served_from = reply.served_from;
  bot.cache_ref = std::move(reply.cache_ref);
  session.turns.push_back(std::move(bot));
  return *session.turns.back().parsed;
}

}  // namespace buddy
