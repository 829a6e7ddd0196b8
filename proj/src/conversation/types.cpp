#include "buddy/conversation/types.hpp"

namespace buddy {

std::string_view to_string(TemplateVersion v) {
  switch (v) {
    case TemplateVersion::V1: return "v1";
    case TemplateVersion::V2: return "v2";
    case TemplateVersion::V3: return "v3";
    case TemplateVersion::V4: return "v4";
    case TemplateVersion::V5: return "v5";
  }
  return "v1";
}

std::string_view to_string(Speaker s) {
  switch (s) {
    case Speaker::Bot: return "bot";
    case Speaker::User: return "user";
    case Speaker::System: return "system";
  }
  return "bot";
}

std::string_view to_string(ServedFrom s) {
  switch (s) {
    case ServedFrom::Cache: return "cache";
    case ServedFrom::Similar: return "similar";
    case ServedFrom::Backend: return "backend";
  }
  return "backend";
}

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Open: return "open";
    case SessionState::SoftClosing: return "soft_closing";
    case SessionState::Closed: return "closed";
  }
  return "open";
}

std::string_view to_string(Feedback f) { return f == Feedback::Positive ? "positive" : "negative"; }

std::optional<TemplateVersion> parse_template_version(std::string_view s) {
  if (s.size() > 4 && s.substr(s.size() - 4) == ".txt") s.remove_suffix(4);
  if (!s.empty() && (s.front() == 'V')) s.remove_prefix(1);
  else if (!s.empty() && s.front() == 'v') s.remove_prefix(1);
  if (s.size() != 1 || s[0] < '1' || s[0] > '5') return std::nullopt;
  return static_cast<TemplateVersion>(s[0] - '1');
}

std::optional<Speaker> parse_speaker(std::string_view s) {
  if (s == "bot") return Speaker::Bot;
  if (s == "user") return Speaker::User;
  if (s == "system") return Speaker::System;
  return std::nullopt;
}

std::optional<ServedFrom> parse_served_from(std::string_view s) {
  if (s == "cache") return ServedFrom::Cache;
  if (s == "similar") return ServedFrom::Similar;
  if (s == "backend") return ServedFrom::Backend;
  return std::nullopt;
}

std::optional<SessionState> parse_session_state(std::string_view s) {
  if (s == "open") return SessionState::Open;
  if (s == "soft_closing") return SessionState::SoftClosing;
  if (s == "closed") return SessionState::Closed;
  return std::nullopt;
}

std::optional<Feedback> parse_feedback(std::string_view s) {
  if (s == "positive") return Feedback::Positive;
  if (s == "negative") return Feedback::Negative;
  return std::nullopt;
}

}  // namespace buddy
