#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "buddy/common/error.hpp"
#include "buddy/conversation/session.hpp"
#include "buddy/conversation/topic.hpp"
#include "buddy/conversation/types.hpp"

namespace buddy {

/// Raised when a `{{slot}}` marker has no value.
class UnresolvedSlot : public Error {
 public:
  explicit UnresolvedSlot(std::string slot)
      : Error("unresolved template slot '" + slot + "'"), slot_(std::move(slot)) {}
  const std::string& slot() const { return slot_; }

 private:
  std::string slot_;
};

struct PromptTemplate {
  TemplateVersion version = TemplateVersion::V1;
  std::string body;
  int target_age = 0;  // read from "Our students are N year old"
};

/// The five template bodies, loaded verbatim from `<dir>/v1.txt` .. `v5.txt`.
class TemplateStore {
 public:
  static TemplateStore load(const std::filesystem::path& dir);

  /// Validates and adds one template; throws ConfigError on a broken body.
  void add(PromptTemplate tmpl);
  const PromptTemplate& get(TemplateVersion v) const;
  bool contains(TemplateVersion v) const { return templates_.count(v) != 0; }

 private:
  std::map<TemplateVersion, PromptTemplate> templates_;
};

/// Single-pass `{{name}}` substitution. Values are inserted verbatim and are
/// never re-scanned. Throws UnresolvedSlot for markers without a value.
std::string render_slots(std::string_view body, const std::map<std::string, std::string>& values);

std::string format_key_expressions(const std::vector<std::string>& expressions);

/// `### Assistant: ...` / `### User: ...` / `### System: ...`, one per line.
std::string serialize_turns(std::span<const Turn> turns);

/// System prompt (template with objective, key expressions and persona filled)
/// followed by the history, oldest first.
std::string render_prompt(const PromptTemplate& tmpl, const Topic& topic, std::string_view persona,
                          std::span<const Turn> history);

/// Same layout for an arbitrary objective, used for criterion cases.
std::string render_system_block(const PromptTemplate& tmpl, std::string_view objective,
                                std::string_view key_expressions, std::string_view persona);

}  // namespace buddy
