#include "buddy/common/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "buddy/common/error.hpp"

namespace buddy::text {
namespace {

bool is_ascii(unsigned char c) { return c < 0x80; }

bool is_word_byte(unsigned char c) { return !is_ascii(c) || std::isalnum(c) != 0; }

}  // namespace

std::string normalize(std::string_view input) {
  std::string out;
  out.reserve(input.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const auto c = static_cast<unsigned char>(input[i]);
    // U+2019 RIGHT SINGLE QUOTATION MARK is treated like an ASCII apostrophe.
    if (c == 0xE2 && i + 2 < input.size() && static_cast<unsigned char>(input[i + 1]) == 0x80 &&
        static_cast<unsigned char>(input[i + 2]) == 0x99) {
      i += 2;
      continue;
    }
    if (c == '\'') continue;
    if (!is_ascii(c) || std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(is_ascii(c) ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> words(std::string_view normalized) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < normalized.size()) {
    auto end = normalized.find(' ', start);
    if (end == std::string_view::npos) end = normalized.size();
    if (end > start) out.emplace_back(normalized.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

bool contains_phrase(std::string_view normalized, std::string_view phrase) {
  if (phrase.empty()) return false;
  std::size_t pos = 0;
  while ((pos = normalized.find(phrase, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || normalized[pos - 1] == ' ';
    const auto end = pos + phrase.size();
    const bool right_ok = end == normalized.size() || normalized[end] == ' ';
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::size_t count_sentences(std::string_view text) {
  std::size_t sentences = 0;
  bool has_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '.' || c == '!' || c == '?') {
      const bool boundary =
          i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])) != 0;
      if (boundary) {
        if (has_word) ++sentences;
        has_word = false;
      }
    } else if (is_word_byte(c)) {
      has_word = true;
    }
  }
  if (has_word) ++sentences;
  return sentences;
}

std::size_t codepoint_length(std::string_view word) {
  std::size_t n = 0;
  for (char ch : word) {
    if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string replace_all(std::string_view s, std::string_view from, std::string_view to) {
  if (from.empty()) return std::string(s);
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto hit = s.find(from, pos);
    if (hit == std::string_view::npos) break;
    out.append(s.substr(pos, hit - pos));
    out.append(to);
    pos = hit + from.size();
  }
  out.append(s.substr(pos));
  return out;
}

std::string flatten_for_transcript(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) out.push_back(ch == '\n' || ch == '\r' ? ' ' : ch);
  while (out.find("###") != std::string::npos) out = replace_all(out, "###", "##");
  return trim(out);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace buddy::text
