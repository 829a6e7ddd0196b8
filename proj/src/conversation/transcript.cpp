#include "buddy/conversation/transcript.hpp"

#include "buddy/common/text.hpp"
#include "buddy/conversation/prompt.hpp"

namespace buddy {

std::string export_transcript(const Session& session, const Topic& topic) {
  std::string out;
  out += "Session: " + session.id + "\n";
  out += "Topic: " + topic.id + " (" + topic.objective + ")\n";
  out += "Persona: " + text::flatten_for_transcript(session.persona) + "\n";
  out += "Template: " + std::string(to_string(session.template_version)) + "\n";
  out += "State: " + std::string(to_string(session.state)) + "\n";
  out += "\n";
  out += serialize_turns(session.turns);
  return out;
}

std::size_t count_transcript_blocks(std::string_view transcript) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < transcript.size()) {
    auto end = transcript.find('\n', pos);
    if (end == std::string_view::npos) end = transcript.size();
    if (transcript.substr(pos, end - pos).starts_with("### ")) ++n;
    pos = end + 1;
  }
  return n;
}

}  // namespace buddy
