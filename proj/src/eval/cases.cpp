#include "buddy/eval/cases.hpp"

#include <algorithm>
#include <set>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"

namespace buddy {

void to_json(nlohmann::json& j, const CriterionCase& c) {
  j = nlohmann::json{{"id", c.id},
                     {"group", c.group},
                     {"expectation", c.expectation},
                     {"setup_prompt", c.setup_prompt},
                     {"objective", c.objective}};
}

void from_json(const nlohmann::json& j, CriterionCase& c) {
  c.id = j.at("id").get<std::string>();
  c.group = j.at("group").get<std::string>();
  c.expectation = j.at("expectation").get<std::string>();
  c.setup_prompt = j.at("setup_prompt").get<std::string>();
  c.objective = j.value("objective", std::string{});
}

CaseCatalog CaseCatalog::load(const std::filesystem::path& path) {
  auto doc = nlohmann::json::parse(text::read_file(path.string()), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("case file " + path.string() + " is not JSON");
  try {
    return parse(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("case file " + path.string() + ": " + e.what());
  }
}

CaseCatalog CaseCatalog::parse(const nlohmann::json& doc) {
  return from_cases(doc.at("cases").get<std::vector<CriterionCase>>());
}

CaseCatalog CaseCatalog::from_cases(std::vector<CriterionCase> cases) {
  std::set<std::string> seen;
  for (const auto& c : cases) {
    if (c.id.empty() || c.group.empty() || c.expectation.empty() || c.setup_prompt.empty()) {
      throw ConfigError("criterion case '" + c.id + "' has an empty field");
    }
    if (!seen.insert(c.id).second) throw ConfigError("duplicate criterion case '" + c.id + "'");
  }
  CaseCatalog cat;
  cat.cases_ = std::move(cases);
  return cat;
}

const CriterionCase* CaseCatalog::find(std::string_view id) const {
  auto it = std::find_if(cases_.begin(), cases_.end(), [&](const auto& c) { return c.id == id; });
  return it == cases_.end() ? nullptr : &*it;
}

std::vector<std::string> CaseCatalog::groups() const {
  std::vector<std::string> out;
  for (const auto& c : cases_) {
    if (std::find(out.begin(), out.end(), c.group) == out.end()) out.push_back(c.group);
  }
  return out;
}

std::vector<std::size_t> CaseCatalog::group_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& g : groups()) {
    sizes.push_back(static_cast<std::size_t>(
        std::count_if(cases_.begin(), cases_.end(), [&](const auto& c) { return c.group == g; })));
  }
  return sizes;
}

const std::string& CaseCatalog::group_of(std::string_view case_id) const {
  const auto* c = find(case_id);
  if (!c) throw Error("unknown criterion case '" + std::string(case_id) + "'");
  return c->group;
}

bool has_reference_shape(const CaseCatalog& catalog) {
  return catalog.cases().size() == 19 && catalog.group_sizes() == std::vector<std::size_t>{1, 1, 1, 1, 1, 5, 1, 3, 5};
}

}  // namespace buddy
