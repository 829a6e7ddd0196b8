#pragma once

#include <string>
#include <string_view>

#include "buddy/conversation/session.hpp"
#include "buddy/conversation/topic.hpp"

namespace buddy {

/// Plain-text transcript: a few `Key: value` header lines, a blank line, then
/// one `### Assistant: ...` / `### User: ...` block per turn.
std::string export_transcript(const Session& session, const Topic& topic);

/// Number of lines starting with `### `.
std::size_t count_transcript_blocks(std::string_view transcript);

}  // namespace buddy
