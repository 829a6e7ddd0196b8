#include "buddy/conversation/topic.hpp"

#include <json.hpp>
#include <set>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"

namespace buddy {
namespace {

using nlohmann::json;

std::vector<std::string> string_list(const json& j, const char* field, const std::string& topic) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw ConfigError("topic '" + topic + "': '" + field + "' must be a list");
  }
  std::vector<std::string> out;
  for (const auto& item : j.at(field)) {
    if (!item.is_string()) throw ConfigError("topic '" + topic + "': '" + field + "' has a non-string");
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::string required_string(const json& j, const char* field, const std::string& topic) {
  if (!j.contains(field) || !j.at(field).is_string()) {
    throw ConfigError("topic '" + topic + "': missing string field '" + field + "'");
  }
  return j.at(field).get<std::string>();
}

Topic parse_topic(const json& j) {
  Topic t;
  t.id = required_string(j, "id", "?");
  t.title = required_string(j, "title", t.id);
  t.objective = required_string(j, "objective", t.id);
  t.key_expressions = string_list(j, "key_expressions", t.id);
  t.opening_line = required_string(j, "opening_line", t.id);
  t.fallback_line = required_string(j, "fallback_line", t.id);
  if (!j.contains("opening_hints")) throw ConfigError("topic '" + t.id + "': missing opening_hints");
  t.opening_hint_sentences = string_list(j.at("opening_hints"), "sentences", t.id);
  t.opening_hint_words = string_list(j.at("opening_hints"), "words", t.id);

  if (text::trim(t.objective).empty()) throw ConfigError("topic '" + t.id + "': empty objective");
  const auto opening = text::trim(t.opening_line);
  if (opening.empty() || opening.back() != '?') {
    throw ConfigError("topic '" + t.id + "': opening_line must end with '?'");
  }
  if (t.opening_hint_sentences.size() != 3 || t.opening_hint_words.size() != 4) {
    throw ConfigError("topic '" + t.id + "': opening hints need 3 sentences and 4 words");
  }
  return t;
}

}  // namespace

TopicCatalog TopicCatalog::load(const std::filesystem::path& path) {
  return parse(text::read_file(path.string()));
}

TopicCatalog TopicCatalog::parse(std::string_view json_text) {
  const auto doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.contains("topics") || !doc.at("topics").is_array()) {
    throw ConfigError("topic catalog: expected an object with a 'topics' list");
  }
  TopicCatalog catalog;
  std::set<std::string> seen;
  for (const auto& item : doc.at("topics")) {
    auto topic = parse_topic(item);
    if (!seen.insert(topic.id).second) throw ConfigError("duplicate topic id '" + topic.id + "'");
    catalog.topics_.push_back(std::move(topic));
  }
  if (catalog.topics_.size() != kTopicCount) {
    throw ConfigError("topic catalog must list exactly 7 topics, found " +
                      std::to_string(catalog.topics_.size()));
  }
  return catalog;
}

const Topic* TopicCatalog::find(std::string_view id) const {
  for (const auto& t : topics_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

}  // namespace buddy
