#include "buddy/conversation/prompt.hpp"

#include <regex>
#include <stdexcept>

#include "buddy/common/text.hpp"

namespace buddy {
namespace {

constexpr std::string_view kFinishedInstruction = "set true to `is_finished`";

int read_target_age(const std::string& body) {
  static const std::regex age_re(R"(Our students are (\d+) year old)");
  std::smatch m;
  if (!std::regex_search(body, m, age_re)) return 0;
  return std::stoi(m[1].str());
}

std::string_view speaker_label(Speaker s) {
  switch (s) {
    case Speaker::Bot: return "Assistant";
    case Speaker::User: return "User";
    case Speaker::System: return "System";
  }
  return "System";
}

}  // namespace

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  TemplateStore store;
  for (auto v : kAllTemplateVersions) {
    const auto path = dir / (std::string(to_string(v)) + ".txt");
    PromptTemplate t;
    t.version = v;
    t.body = text::read_file(path.string());
    store.add(std::move(t));
  }
  return store;
}

void TemplateStore::add(PromptTemplate tmpl) {
  const auto name = std::string(to_string(tmpl.version));
  for (std::string_view field : {"\"text\"", "\"hint_sentences\"", "\"hint_words\""}) {
    if (tmpl.body.find(field) == std::string::npos) {
      throw ConfigError("template " + name + " lacks schema field " + std::string(field));
    }
  }
  if (tmpl.body.find(kFinishedInstruction) == std::string::npos) {
    throw ConfigError("template " + name + " lacks the is_finished instruction");
  }
  tmpl.target_age = read_target_age(tmpl.body);
  if (tmpl.target_age <= 0) throw ConfigError("template " + name + " does not state a student age");
  templates_[tmpl.version] = std::move(tmpl);
}

const PromptTemplate& TemplateStore::get(TemplateVersion v) const {
  auto it = templates_.find(v);
  if (it == templates_.end()) throw ConfigError("template " + std::string(to_string(v)) + " not loaded");
  return it->second;
}

std::string render_slots(std::string_view body, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(body.size() + 128);
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) throw UnresolvedSlot(std::string(body.substr(open)));
    const auto name = std::string(body.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw UnresolvedSlot(name);
    out.append(body.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
  out.append(body.substr(std::min(pos, body.size())));
  return out;
}

std::string format_key_expressions(const std::vector<std::string>& expressions) {
  if (expressions.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < expressions.size(); ++i) {
    if (i) out += ", ";
    out += "'" + expressions[i] + "'";
  }
  return out;
}

std::string serialize_turns(std::span<const Turn> turns) {
  std::string out;
  for (const auto& t : turns) {
    const auto& content = (t.speaker == Speaker::Bot && t.parsed) ? t.parsed->text : t.content;
    out += "### ";
    out += speaker_label(t.speaker);
    out += ": ";
    out += text::flatten_for_transcript(content);
    out += '\n';
  }
  return out;
}

std::string render_system_block(const PromptTemplate& tmpl, std::string_view objective,
                                std::string_view key_expressions, std::string_view persona) {
  if (text::trim(persona).empty()) throw std::invalid_argument("persona must not be empty");
  const std::map<std::string, std::string> values{
      {"objective", std::string(objective)},
      {"key_expressions", std::string(key_expressions)},
      {"persona", std::string(persona)},
  };
  auto body = text::trim(render_slots(tmpl.body, values));
  return "### System: " + body + "\n";
}

std::string render_prompt(const PromptTemplate& tmpl, const Topic& topic, std::string_view persona,
                          std::span<const Turn> history) {
  return render_system_block(tmpl, topic.objective, format_key_expressions(topic.key_expressions),
                             persona) +
         serialize_turns(history);
}

}  // namespace buddy
