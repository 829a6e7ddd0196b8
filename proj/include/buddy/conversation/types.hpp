#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace buddy {

enum class TemplateVersion { V1, V2, V3, V4, V5 };
enum class Speaker { Bot, User, System };
enum class ServedFrom { Cache, Similar, Backend };
enum class SessionState { Open, SoftClosing, Closed };
enum class Feedback { Positive, Negative };

inline constexpr std::array<TemplateVersion, 5> kAllTemplateVersions = {
    TemplateVersion::V1, TemplateVersion::V2, TemplateVersion::V3, TemplateVersion::V4,
    TemplateVersion::V5};

// Wire names: "v1".."v5", "bot"/"user"/"system", "cache"/"similar"/"backend",
// "open"/"soft_closing"/"closed", "positive"/"negative".
std::string_view to_string(TemplateVersion v);
std::string_view to_string(Speaker s);
std::string_view to_string(ServedFrom s);
std::string_view to_string(SessionState s);
std::string_view to_string(Feedback f);

std::optional<TemplateVersion> parse_template_version(std::string_view s);
std::optional<Speaker> parse_speaker(std::string_view s);
std::optional<ServedFrom> parse_served_from(std::string_view s);
std::optional<SessionState> parse_session_state(std::string_view s);
std::optional<Feedback> parse_feedback(std::string_view s);

}  // namespace buddy
