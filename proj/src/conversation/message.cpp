#include "buddy/conversation/message.hpp"

#include "buddy/common/text.hpp"

namespace buddy {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxCandidates = 256;
constexpr int kMaxNesting = 64;

// Finds the closing brace matching raw[start] == '{'. Returns npos when the
// object never closes or nests deeper than kMaxNesting.
std::size_t match_object(std::string_view raw, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{':
      case '[':
        if (++depth > kMaxNesting) return std::string_view::npos;
        break;
      case '}':
      case ']':
        if (--depth == 0) return c == '}' ? i : std::string_view::npos;
        if (depth < 0) return std::string_view::npos;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

std::optional<std::vector<std::string>> string_array(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_array()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) return std::nullopt;
    out.push_back(v.get<std::string>());
  }
  return out;
}

ParseOutcome fail(MessageErrorKind kind, std::string detail, bool end_marker) {
  ParseOutcome out;
  out.error = MessageError{kind, std::move(detail)};
  out.end_marker = end_marker;
  return out;
}

}  // namespace

void to_json(json& j, const BotMessage& m) {
  j = json{{"text", m.text},
           {"hint_sentences", m.hint_sentences},
           {"hint_words", m.hint_words},
           {"is_finished", m.is_finished}};
}

void from_json(const json& j, BotMessage& m) {
  j.at("text").get_to(m.text);
  j.at("hint_sentences").get_to(m.hint_sentences);
  j.at("hint_words").get_to(m.hint_words);
  m.is_finished = j.value("is_finished", false);
}

std::string_view to_string(MessageErrorKind kind) {
  switch (kind) {
    case MessageErrorKind::Parse: return "ParseError";
    case MessageErrorKind::Schema: return "SchemaError";
    case MessageErrorKind::Length: return "LengthError";
  }
  return "ParseError";
}

std::optional<std::pair<std::size_t, std::size_t>> find_json_object(std::string_view raw) {
  std::size_t candidates = 0;
  for (auto pos = raw.find('{'); pos != std::string_view::npos && candidates < kMaxCandidates;
       pos = raw.find('{', pos + 1), ++candidates) {
    const auto close = match_object(raw, pos);
    if (close == std::string_view::npos) continue;
    const auto slice = raw.substr(pos, close - pos + 1);
    const auto doc = json::parse(slice.begin(), slice.end(), nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) return std::make_pair(pos, close + 1);
  }
  return std::nullopt;
}

ParseOutcome parse_bot_message(std::string_view raw) {
  const bool end_marker = raw.find(kEndMarker) != std::string_view::npos;
  const auto span = find_json_object(raw);
  if (!span) return fail(MessageErrorKind::Parse, "no JSON object found", end_marker);

  const auto slice = raw.substr(span->first, span->second - span->first);
  const auto obj = json::parse(slice.begin(), slice.end(), nullptr, false);

  const auto text_it = obj.find("text");
  if (text_it == obj.end() || !text_it->is_string()) {
    return fail(MessageErrorKind::Schema, "missing string field 'text'", end_marker);
  }
  auto sentences = string_array(obj, "hint_sentences");
  if (!sentences || sentences->size() != kHintSentenceCount) {
    return fail(MessageErrorKind::Schema, "hint_sentences must hold exactly 3 strings", end_marker);
  }
  auto hint_words = string_array(obj, "hint_words");
  if (!hint_words || hint_words->size() != kHintWordCount) {
    return fail(MessageErrorKind::Schema, "hint_words must hold exactly 4 strings", end_marker);
  }
  bool finished = false;
  if (auto it = obj.find("is_finished"); it != obj.end()) {
    if (!it->is_boolean()) return fail(MessageErrorKind::Schema, "is_finished must be a boolean", end_marker);
    finished = it->get<bool>();
  }

  BotMessage msg;
  msg.text = text::trim(text::replace_all(text_it->get<std::string>(), kEndMarker, ""));
  if (text::count_sentences(msg.text) > kMaxBotSentences) {
    return fail(MessageErrorKind::Length, "text has more than two sentences", end_marker);
  }
  msg.hint_sentences = std::move(*sentences);
  msg.hint_words = std::move(*hint_words);
  msg.is_finished = finished || end_marker;

  ParseOutcome out;
  out.message = std::move(msg);
  out.end_marker = end_marker;
  return out;
}

}  // namespace buddy
