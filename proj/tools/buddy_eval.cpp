#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"
#include "buddy/eval/harness.hpp"

namespace {

using nlohmann::json;

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out.flush()) throw buddy::Error("cannot write " + path.string());
}

buddy::BackendSpec parse_judge_flag(const std::string& flag) {
  buddy::BackendSpec spec;
  if (auto eq = flag.find('='); eq != std::string::npos && !flag.starts_with("mock:") && !flag.starts_with("http")) {
    spec.name = flag.substr(0, eq);
    spec.endpoint = flag.substr(eq + 1);
  } else {
    spec.endpoint = flag;
    spec.name = flag.starts_with("mock:") ? flag.substr(5, flag.find('?') - 5) : "judge";
  }
  return spec;
}

std::vector<buddy::TemplateVersion> parse_versions(const std::string& csv) {
  std::vector<buddy::TemplateVersion> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto v = buddy::parse_template_version(buddy::text::trim(item));
    if (!v) throw buddy::ConfigError("unknown template version '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

std::string records_jsonl(const std::vector<buddy::TrialRecord>& records) {
  std::string out;
  for (const auto& r : records) out += json(r).dump() + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Criterion-case evaluation harness"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  const std::string data_dir = BUDDY_DATA_DIR;

  auto* run = app.add_subcommand("run", "Run backends x templates x cases x trials and write records + report");
  std::string backends_file = data_dir + "/eval/backends.mock.json";
  std::string templates_dir = data_dir + "/templates";
  std::string versions = "v1,v2,v3,v4,v5";
  std::string cases_file = data_dir + "/eval/cases.json";
  std::string scripts_dir = data_dir + "/scripts";
  std::string judge_flag;
  std::string out_dir = "eval-out";
  buddy::RunConfig run_config;
  double run_epsilon = buddy::kDefaultSelectionEpsilon;
  run->add_option("--backends", backends_file, "JSON file: {\"backends\": [...], \"judge\": {...}}");
  run->add_option("--templates", templates_dir, "Template directory");
  run->add_option("--versions", versions, "Comma-separated template versions");
  run->add_option("--cases", cases_file, "Criterion case file");
  run->add_option("--scripts", scripts_dir, "Mock script directory");
  run->add_option("--judge", judge_flag, "Judge endpoint, or name=endpoint (overrides the backends file)");
  run->add_option("--trials", run_config.trials, "Trials per case")->check(CLI::PositiveNumber);
  run->add_option("--parallel", run_config.parallel, "Concurrent trials")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_config.seed, "Seed for mock scripts");
  run->add_option("--epsilon", run_epsilon, "Selection epsilon for ranking.txt")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Output directory");

  auto* agg = app.add_subcommand("aggregate", "Aggregate a records.jsonl file into a report");
  std::string records_file;
  std::string report_out = "report.csv";
  agg->add_option("--records", records_file, "records.jsonl from run")->required();
  agg->add_option("--cases", cases_file, "Criterion case file");
  agg->add_option("--out", report_out, "Report CSV path");

  auto* sel = app.add_subcommand("select", "Rank a report and pick the balanced combo");
  std::string report_in;
  double epsilon = buddy::kDefaultSelectionEpsilon;
  sel->add_option("--report", report_in, "Report CSV (model,prompt,score,error,etime,...)")->required();
  sel->add_option("--epsilon", epsilon, "Score window below the top combo")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (run->parsed()) {
      const auto doc = json::parse(buddy::text::read_file(backends_file));
      const auto backends = doc.at("backends").get<std::vector<buddy::BackendSpec>>();
      buddy::BackendSpec judge;
      if (!judge_flag.empty()) {
        judge = parse_judge_flag(judge_flag);
      } else if (doc.contains("judge")) {
        judge = doc.at("judge").get<buddy::BackendSpec>();
      } else {
        throw buddy::ConfigError("no judge: pass --judge or add \"judge\" to the backends file");
      }
      const auto templates = buddy::TemplateStore::load(templates_dir);
      const auto cases = buddy::CaseCatalog::load(cases_file);
      auto scripts = std::make_shared<buddy::ScriptLibrary>(
          std::filesystem::is_directory(scripts_dir) ? buddy::ScriptLibrary::load_dir(scripts_dir)
                                                     : buddy::ScriptLibrary{});
      const auto records = buddy::run_matrix(backends, templates, parse_versions(versions), cases, judge, run_config,
                                             buddy::script_client_factory(scripts));
      const auto reports = buddy::aggregate(records, cases);
      const std::filesystem::path out(out_dir);
      write_file(out / "records.jsonl", records_jsonl(records));
      write_file(out / "report.csv", buddy::format_report_csv(reports));
      if (!reports.empty()) {
        write_file(out / "ranking.txt",
                   buddy::format_ranking(buddy::rank_and_select(reports, run_epsilon), run_epsilon));
      }
      std::cout << records.size() << " records, " << reports.size() << " combos -> " << out.string() << "\n";
    } else if (agg->parsed()) {
      const auto cases = buddy::CaseCatalog::load(cases_file);
      std::vector<buddy::TrialRecord> records;
      std::istringstream in(buddy::text::read_file(records_file));
      std::string line;
      while (std::getline(in, line)) {
        if (!buddy::text::trim(line).empty()) records.push_back(json::parse(line).get<buddy::TrialRecord>());
      }
      write_file(report_out, buddy::format_report_csv(buddy::aggregate(records, cases)));
      std::cout << records.size() << " records -> " << report_out << "\n";
    } else if (sel->parsed()) {
      const auto reports = buddy::parse_report_csv(buddy::text::read_file(report_in));
      std::cout << buddy::format_ranking(buddy::rank_and_select(reports, epsilon), epsilon);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
