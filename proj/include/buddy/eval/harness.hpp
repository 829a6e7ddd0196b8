#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "buddy/backend/backend.hpp"
#include "buddy/conversation/prompt.hpp"
#include "buddy/conversation/types.hpp"
#include "buddy/eval/cases.hpp"
#include "buddy/eval/judge.hpp"

namespace buddy {

struct Combo {
  std::string backend;
  TemplateVersion version = TemplateVersion::V1;

  /// "backend/v3"; the last tie-breaker when ranking.
  std::string name() const;
  friend bool operator==(const Combo&, const Combo&) = default;
};

struct TrialRecord {
  Combo combo;
  std::string case_id;
  std::size_t trial_index = 0;
  /// Absent when the candidate backend or the judge failed.
  std::optional<JudgeVerdict> verdict;
  std::size_t error_events = 0;
  /// Mean generation latency of this trial's candidate completions, seconds.
  double latency_s = 0.0;
  std::size_t completions = 0;
  std::string note;
};

void to_json(nlohmann::json& j, const TrialRecord& r);
void from_json(const nlohmann::json& j, TrialRecord& r);

/// Candidate prompt for one case: the template system block for the case
/// objective (persona Buddy, no key expressions), then the setup transcript
/// with one `###` block per line.
std::string render_case_prompt(const PromptTemplate& tmpl, const CriterionCase& c);

enum class ClientRole { Candidate, Judge };

struct TaskContext {
  ClientRole role = ClientRole::Candidate;
  std::size_t backend_index = 0;
  std::size_t template_index = 0;
  std::size_t case_index = 0;
  const CriterionCase* criterion = nullptr;
  std::size_t trial_index = 0;
  std::uint64_t run_seed = 0;
};

/// Builds the client used for one trial. Every trial gets fresh clients so
/// results do not depend on scheduling.
using ClientFactory = std::function<std::unique_ptr<CompletionClient>(const BackendSpec&, const TaskContext&)>;

/// HTTP clients for URL endpoints. For `mock:` endpoints a scripted client:
/// seeded per task when the endpoint carries `seed=` or the run seed is
/// non-zero, otherwise replaying from line `trial_index`.
ClientFactory script_client_factory(std::shared_ptr<const ScriptLibrary> scripts);

struct RunConfig {
  std::size_t trials = 3;
  std::size_t parallel = 4;
  std::uint64_t seed = 0;
  /// Candidate completions attempted per trial until one parses; each
  /// unparseable completion is one error event.
  std::size_t max_attempts = 3;
};

/// Records in backend-major, template, case, trial order.
std::vector<TrialRecord> run_matrix(const std::vector<BackendSpec>& backends, const TemplateStore& templates,
                                    const std::vector<TemplateVersion>& versions, const CaseCatalog& cases,
                                    const BackendSpec& judge, const RunConfig& config, const ClientFactory& factory);

struct ComboReport {
  Combo combo;
  std::vector<std::pair<std::string, double>> per_case_mean;
  std::vector<std::pair<std::string, double>> per_group_mean;
  double flat_mean = 0.0;
  double error_rate = 0.0;
  double mean_latency = 0.0;
  std::size_t trials = 0;
  /// Trials without a verdict, left out of the score means.
  std::size_t excluded = 0;
};

/// One report per combo in order of first appearance. Cases and groups follow
/// catalog order; a case with no verdicts is left out of every mean.
std::vector<ComboReport> aggregate(const std::vector<TrialRecord>& records, const CaseCatalog& cases);

struct Selection {
  std::vector<ComboReport> ranking;
  ComboReport selected;
};

inline constexpr double kDefaultSelectionEpsilon = 0.10;

/// Ranking: score desc, error asc, latency asc, name asc. Selected: lowest
/// error (then latency, then name) among combos scoring >= top - epsilon.
/// Throws std::invalid_argument for an empty list or negative epsilon.
Selection rank_and_select(std::vector<ComboReport> reports, double epsilon = kDefaultSelectionEpsilon);

/// CSV: model,prompt,score,error,etime then one column per group.
std::string format_report_csv(const std::vector<ComboReport>& reports);
/// Reads format_report_csv output or the same five leading columns alone.
std::vector<ComboReport> parse_report_csv(std::string_view csv);
std::string format_ranking(const Selection& selection, double epsilon);

/// Per-case score table (`case,<model>,<model>...`) as one record per cell.
std::vector<TrialRecord> records_from_case_table(std::string_view csv, TemplateVersion version);

}  // namespace buddy
