#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace buddy {

struct CriterionCase {
  std::string id;
  std::string group;
  std::string expectation;
  std::string setup_prompt;
  /// Objective quoted in the setup prompt; fills the template slot.
  std::string objective;
};

void to_json(nlohmann::json& j, const CriterionCase& c);
void from_json(const nlohmann::json& j, CriterionCase& c);

class CaseCatalog {
 public:
  /// `{"cases": [...]}`. Throws ConfigError on duplicates or empty fields.
  static CaseCatalog load(const std::filesystem::path& path);
  static CaseCatalog parse(const nlohmann::json& doc);
  static CaseCatalog from_cases(std::vector<CriterionCase> cases);

  const std::vector<CriterionCase>& cases() const { return cases_; }
  const CriterionCase* find(std::string_view id) const;
  /// Group names in order of first appearance.
  std::vector<std::string> groups() const;
  std::vector<std::size_t> group_sizes() const;
  const std::string& group_of(std::string_view case_id) const;

 private:
  std::vector<CriterionCase> cases_;
};

/// The shipped set: 19 cases, 9 groups, sizes {1,1,1,1,1,5,1,3,5}.
bool has_reference_shape(const CaseCatalog& catalog);

}  // namespace buddy
