#include "buddy/eval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"
#include "buddy/conversation/message.hpp"

namespace buddy {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t task_seed(std::uint64_t base, const TaskContext& ctx) {
  std::uint64_t h = splitmix64(base ^ ctx.run_seed);
  for (std::uint64_t part : {static_cast<std::uint64_t>(ctx.role), std::uint64_t{ctx.backend_index},
                             std::uint64_t{ctx.template_index}, std::uint64_t{ctx.case_index},
                             std::uint64_t{ctx.trial_index}}) {
    h = splitmix64(h ^ part);
  }
  return h;
}

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  return "\"" + text::replace_all(s, "\"", "\"\"") + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<std::vector<std::string>> read_csv(std::string_view csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

double parse_number(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error("bad number '" + s + "' for " + std::string(what));
  }
}

TemplateVersion require_version(const std::string& s) {
  auto v = parse_template_version(s);
  if (!v) throw Error("unknown template version '" + s + "'");
  return *v;
}

bool ranks_before(const ComboReport& a, const ComboReport& b) {
  if (a.flat_mean != b.flat_mean) return a.flat_mean > b.flat_mean;
  if (a.error_rate != b.error_rate) return a.error_rate < b.error_rate;
  if (a.mean_latency != b.mean_latency) return a.mean_latency < b.mean_latency;
  return a.combo.name() < b.combo.name();
}

}  // namespace

std::string Combo::name() const { return backend + "/" + std::string(to_string(version)); }

void to_json(json& j, const TrialRecord& r) {
  j = json{{"backend", r.combo.backend},
           {"template", to_string(r.combo.version)},
           {"case", r.case_id},
           {"trial", r.trial_index},
           {"score", r.verdict ? json(r.verdict->score) : json(nullptr)},
           {"rationale", r.verdict ? r.verdict->rationale : std::string{}},
           {"error_events", r.error_events},
           {"latency_s", r.latency_s},
           {"completions", r.completions},
           {"note", r.note}};
}

void from_json(const json& j, TrialRecord& r) {
  r.combo.backend = j.at("backend").get<std::string>();
  r.combo.version = require_version(j.at("template").get<std::string>());
  r.case_id = j.at("case").get<std::string>();
  r.trial_index = j.at("trial").get<std::size_t>();
  r.verdict.reset();
  if (const auto& s = j.at("score"); !s.is_null()) {
    r.verdict = JudgeVerdict{s.get<double>(), j.value("rationale", std::string{})};
  }
  r.error_events = j.at("error_events").get<std::size_t>();
  r.latency_s = j.at("latency_s").get<double>();
  r.completions = j.value("completions", std::size_t{0});
  r.note = j.value("note", std::string{});
}

std::string render_case_prompt(const PromptTemplate& tmpl, const CriterionCase& c) {
  std::string out = render_system_block(tmpl, c.objective, format_key_expressions({}), "Buddy");
  const std::string_view setup = c.setup_prompt;
  std::size_t pos = 0;
  while (pos < setup.size()) {
    auto next = setup.find("###", pos + 1);
    if (next == std::string_view::npos) next = setup.size();
    const auto block = text::trim(setup.substr(pos, next - pos));
    if (!block.empty()) out += block + "\n";
    pos = next;
  }
  return out;
}

ClientFactory script_client_factory(std::shared_ptr<const ScriptLibrary> scripts) {
  return [scripts = std::move(scripts)](const BackendSpec& spec,
                                        const TaskContext& ctx) -> std::unique_ptr<CompletionClient> {
    spec.validate();
    if (!spec.is_mock()) return std::make_unique<HttpCompletionClient>(spec);
    auto mock = parse_mock_endpoint(spec.endpoint);
    if (!mock) throw ConfigError("malformed mock endpoint '" + spec.endpoint + "'");
    auto options = mock->options;
    if (options.seed || ctx.run_seed != 0) {
      options.seed = task_seed(options.seed.value_or(0), ctx);
    } else {
      options.start += ctx.trial_index;
    }
    const std::string case_id = ctx.criterion ? ctx.criterion->id : std::string{};
    return std::make_unique<ScriptedCompletionClient>(spec, scripts->resolve(mock->script_id, case_id), options);
  };
}

std::vector<TrialRecord> run_matrix(const std::vector<BackendSpec>& backends, const TemplateStore& templates,
                                    const std::vector<TemplateVersion>& versions, const CaseCatalog& cases,
                                    const BackendSpec& judge, const RunConfig& config, const ClientFactory& factory) {
  if (config.trials == 0) throw std::invalid_argument("trials must be >= 1");
  if (config.max_attempts == 0) throw std::invalid_argument("max_attempts must be >= 1");
  if (!factory) throw std::invalid_argument("run_matrix needs a client factory");
  for (const auto& b : backends) b.validate();
  judge.validate();

  std::vector<TaskContext> tasks;
  for (std::size_t b = 0; b < backends.size(); ++b) {
    for (std::size_t t = 0; t < versions.size(); ++t) {
      for (std::size_t c = 0; c < cases.cases().size(); ++c) {
        for (std::size_t k = 0; k < config.trials; ++k) {
          TaskContext ctx;
          ctx.backend_index = b;
          ctx.template_index = t;
          ctx.case_index = c;
          ctx.criterion = &cases.cases()[c];
          ctx.trial_index = k;
          ctx.run_seed = config.seed;
          tasks.push_back(ctx);
        }
      }
    }
  }

  std::vector<TrialRecord> records(tasks.size());
  auto run_one = [&](std::size_t i) {
    const TaskContext& ctx = tasks[i];
    const auto& criterion = *ctx.criterion;
    TrialRecord& rec = records[i];
    rec.combo = Combo{backends[ctx.backend_index].name, versions[ctx.template_index]};
    rec.case_id = criterion.id;
    rec.trial_index = ctx.trial_index;

    auto candidate = factory(backends[ctx.backend_index], ctx);
    const auto prompt = render_case_prompt(templates.get(versions[ctx.template_index]), criterion);

    std::optional<std::string> reply;
    std::string last_raw;
    double latency_sum = 0.0;
    for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
      auto res = candidate->complete(prompt);
      if (!res.ok()) {
        rec.note = "backend " + std::string(to_string(res.error->kind)) + ": " + res.error->message;
        break;
      }
      latency_sum += res.latency_s;
      ++rec.completions;
      auto parsed = parse_bot_message(res.raw_text);
      if (parsed.ok()) {
        reply = parsed.message->text;
        break;
      }
      ++rec.error_events;
      last_raw = std::move(res.raw_text);
    }
    if (rec.completions > 0) rec.latency_s = latency_sum / static_cast<double>(rec.completions);
    if (!reply && rec.completions > 0) reply = last_raw;  // the judge still grades what the model said
    if (!reply) return;

    auto judge_ctx = ctx;
    judge_ctx.role = ClientRole::Judge;
    auto grader = factory(judge, judge_ctx);
    auto verdict_raw = grader->complete(build_judge_prompt(criterion, *reply));
    if (!verdict_raw.ok()) {
      rec.note = "judge " + std::string(to_string(verdict_raw.error->kind)) + ": " + verdict_raw.error->message;
      return;
    }
    rec.verdict = parse_judge_verdict(verdict_raw.raw_text);
    if (!rec.verdict) rec.note = "judge returned no usable score";
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) run_one(i);
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.parallel, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return records;
}

std::vector<ComboReport> aggregate(const std::vector<TrialRecord>& records, const CaseCatalog& cases) {
  struct Acc {
    Combo combo;
    std::map<std::string, std::pair<double, std::size_t>> by_case;
    std::size_t trials = 0;
    std::size_t excluded = 0;
    std::size_t errors = 0;
    double latency = 0.0;
    std::size_t latency_n = 0;
  };
  std::vector<Acc> accs;
  for (const auto& r : records) {
    if (!cases.find(r.case_id)) throw Error("record for unknown case '" + r.case_id + "'");
    auto it = std::find_if(accs.begin(), accs.end(), [&](const Acc& a) { return a.combo == r.combo; });
    if (it == accs.end()) {
      accs.push_back(Acc{r.combo, {}, 0, 0, 0, 0.0, 0});
      it = std::prev(accs.end());
    }
    ++it->trials;
    it->errors += r.error_events;
    if (r.completions > 0) {
      it->latency += r.latency_s;
      ++it->latency_n;
    }
    if (!r.verdict) {
      ++it->excluded;
      spdlog::warn("excluding {} {} trial {} from score means: {}", r.combo.name(), r.case_id, r.trial_index,
                   r.note.empty() ? "no verdict" : r.note);
      continue;
    }
    auto& cell = it->by_case[r.case_id];
    cell.first += r.verdict->score;
    ++cell.second;
  }

  std::vector<ComboReport> out;
  for (const auto& acc : accs) {
    ComboReport rep;
    rep.combo = acc.combo;
    rep.trials = acc.trials;
    rep.excluded = acc.excluded;
    rep.error_rate = static_cast<double>(acc.errors) / static_cast<double>(acc.trials);
    rep.mean_latency = acc.latency_n ? acc.latency / static_cast<double>(acc.latency_n) : 0.0;
    double flat = 0.0;
    for (const auto& c : cases.cases()) {
      auto cell = acc.by_case.find(c.id);
      if (cell == acc.by_case.end()) continue;
      const double mean = cell->second.first / static_cast<double>(cell->second.second);
      rep.per_case_mean.emplace_back(c.id, mean);
      flat += mean;
    }
    if (!rep.per_case_mean.empty()) rep.flat_mean = flat / static_cast<double>(rep.per_case_mean.size());
    for (const auto& g : cases.groups()) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& [id, mean] : rep.per_case_mean) {
        if (cases.group_of(id) == g) {
          sum += mean;
          ++n;
        }
      }
      if (n) rep.per_group_mean.emplace_back(g, sum / static_cast<double>(n));
    }
    out.push_back(std::move(rep));
  }
  return out;
}

Selection rank_and_select(std::vector<ComboReport> reports, double epsilon) {
  if (reports.empty()) throw std::invalid_argument("rank_and_select needs at least one report");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  std::sort(reports.begin(), reports.end(), ranks_before);
  // Published scores carry two decimals; keep 4.41 - 0.10 inclusive of 4.31.
  const double cutoff = reports.front().flat_mean - epsilon - 1e-9;
  const ComboReport* best = nullptr;
  for (const auto& r : reports) {
    if (r.flat_mean < cutoff) continue;
    if (!best || r.error_rate < best->error_rate ||
        (r.error_rate == best->error_rate &&
         (r.mean_latency < best->mean_latency ||
          (r.mean_latency == best->mean_latency && r.combo.name() < best->combo.name())))) {
      best = &r;
    }
  }
  Selection s;
  s.selected = *best;
  s.ranking = std::move(reports);
  return s;
}

std::string format_report_csv(const std::vector<ComboReport>& reports) {
  std::vector<std::string> groups;
  for (const auto& r : reports) {
    for (const auto& [g, _] : r.per_group_mean) {
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
  }
  std::string out = "model,prompt,score,error,etime";
  for (const auto& g : groups) out += "," + csv_field(g);
  out += "\n";
  for (const auto& r : reports) {
    out += csv_field(r.combo.backend) + "," + std::string(to_string(r.combo.version)) + "," +
           fixed(r.flat_mean, 4) + "," + fixed(r.error_rate, 4) + "," + fixed(r.mean_latency, 2);
    for (const auto& g : groups) {
      out += ",";
      auto it = std::find_if(r.per_group_mean.begin(), r.per_group_mean.end(),
                             [&](const auto& p) { return p.first == g; });
      if (it != r.per_group_mean.end()) out += fixed(it->second, 4);
    }
    out += "\n";
  }
  return out;
}

std::vector<ComboReport> parse_report_csv(std::string_view csv) {
  const auto rows = read_csv(csv);
  if (rows.empty()) throw Error("report is empty");
  const auto& header = rows.front();
  const std::vector<std::string> lead = {"model", "prompt", "score", "error", "etime"};
  if (header.size() < lead.size() || !std::equal(lead.begin(), lead.end(), header.begin())) {
    throw Error("report header must start with model,prompt,score,error,etime");
  }
  std::vector<ComboReport> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) throw Error("report row " + std::to_string(i) + " has the wrong column count");
    ComboReport r;
    r.combo.backend = row[0];
    r.combo.version = require_version(row[1]);
    r.flat_mean = parse_number(row[2], "score");
    r.error_rate = parse_number(row[3], "error");
    r.mean_latency = parse_number(row[4], "etime");
    for (std::size_t c = lead.size(); c < header.size(); ++c) {
      if (!row[c].empty()) r.per_group_mean.emplace_back(header[c], parse_number(row[c], header[c]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_ranking(const Selection& selection, double epsilon) {
  std::string out = "rank  score   error   etime   combo\n";
  std::size_t rank = 0;
  for (const auto& r : selection.ranking) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%4zu  %.4f  %.4f  %6.2f  ", ++rank, r.flat_mean, r.error_rate, r.mean_latency);
    out += buf + r.combo.name() + "\n";
  }
  const auto& s = selection.selected;
  out += "\nselected (epsilon " + fixed(epsilon, 2) + "): " + s.combo.name() + " score " + fixed(s.flat_mean, 4) +
         " error " + fixed(s.error_rate, 4) + " etime " + fixed(s.mean_latency, 2) + "\n";
  return out;
}

std::vector<TrialRecord> records_from_case_table(std::string_view csv, TemplateVersion version) {
  const auto rows = read_csv(csv);
  if (rows.empty() || rows.front().empty() || rows.front().front() != "case") {
    throw Error("case table must start with a 'case' column");
  }
  const auto& header = rows.front();
  std::vector<TrialRecord> out;
  for (std::size_t col = 1; col < header.size(); ++col) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.size() != header.size()) throw Error("case table row " + std::to_string(i) + " is ragged");
      TrialRecord r;
      r.combo = Combo{header[col], version};
      r.case_id = row[0];
      r.verdict = JudgeVerdict{parse_number(row[col], row[0]), {}};
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace buddy
