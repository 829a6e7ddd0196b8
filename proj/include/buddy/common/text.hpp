#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace buddy::text {

/// Lowercases ASCII letters, drops apostrophes, turns other punctuation and
/// whitespace into single spaces, and trims. Bytes >= 0x80 pass through, so
/// UTF-8 input survives. Idempotent.
std::string normalize(std::string_view input);

/// Splits already-normalized text on single spaces.
std::vector<std::string> words(std::string_view normalized);

/// True when `phrase` (normalized) occurs in `normalized` on word boundaries.
bool contains_phrase(std::string_view normalized, std::string_view phrase);

/// Number of sentences: segments delimited by `.`, `!` or `?` followed by
/// whitespace or end of string that contain at least one word character.
std::size_t count_sentences(std::string_view text);

/// Length in code points (UTF-8 continuation bytes are not counted).
std::size_t codepoint_length(std::string_view word);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string_view s, std::string_view from, std::string_view to);

/// Collapses newlines and `###` markers so user-controlled text cannot open a
/// new transcript block.
std::string flatten_for_transcript(std::string_view s);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string read_file(const std::string& path);

}  // namespace buddy::text
