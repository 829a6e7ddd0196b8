#include "buddy/backend/backend.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"

namespace buddy {
namespace {

using nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point start) {
  return std::chrono::duration<double>(SteadyClock::now() - start).count();
}

void default_sleep(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = scheme_end == std::string::npos ? url.find('/') : url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  auto path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

void BackendSpec::validate() const {
  if (name.empty()) throw ConfigError("backend name must not be empty");
  if (endpoint.empty()) throw ConfigError("backend '" + name + "' has no endpoint");
  if (!(timeout_s > 0.0)) throw ConfigError("backend '" + name + "' timeout must be positive");
  if (max_retries < 0) throw ConfigError("backend '" + name + "' max_retries must be >= 0");
}

void to_json(json& j, const BackendSpec& s) {
  j = json{{"name", s.name},
           {"endpoint", s.endpoint},
           {"timeout", s.timeout_s},
           {"max_retries", s.max_retries},
           {"api_key_env", s.api_key_env}};
}

void from_json(const json& j, BackendSpec& s) {
  j.at("name").get_to(s.name);
  j.at("endpoint").get_to(s.endpoint);
  s.timeout_s = j.value("timeout", 30.0);
  s.max_retries = j.value("max_retries", 2);
  s.api_key_env = j.value("api_key_env", std::string("BUDDY_BACKEND_API_KEY"));
}

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::Timeout: return "Timeout";
    case BackendErrorKind::Transport: return "Transport";
    case BackendErrorKind::NonSuccessStatus: return "NonSuccessStatus";
    case BackendErrorKind::MalformedResponse: return "MalformedResponse";
  }
  return "Transport";
}

// ---------------------------------------------------------------------------
// HTTP

HttpCompletionClient::HttpCompletionClient(BackendSpec spec, RetryPolicy retry)
    : spec_(std::move(spec)), retry_(std::move(retry)) {
  spec_.validate();
  if (!retry_.sleep) retry_.sleep = default_sleep;
  auto [base, prefix] = split_url(spec_.endpoint);
  scheme_host_port_ = std::move(base);
  path_ = prefix + "/v1/completions";
}

json HttpCompletionClient::request_body(const BackendSpec& spec, std::string_view prompt) {
  return json{{"model", spec.name},
              {"prompt", std::string(prompt)},
              {"max_tokens", 256},
              {"temperature", 0.7},
              {"stop", json::array({"### User:"})}};
}

std::optional<std::string> HttpCompletionClient::parse_response_body(std::string_view body) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const auto& first = (*choices)[0];
  if (!first.is_object()) return std::nullopt;
  auto text_it = first.find("text");
  if (text_it == first.end() || !text_it->is_string()) return std::nullopt;
  return text_it->get<std::string>();
}

CompletionResult HttpCompletionClient::complete(std::string_view prompt) {
  if (prompt.empty()) throw std::invalid_argument("prompt must not be empty");
  const auto start = SteadyClock::now();
  CompletionResult result;

  if (scheme_host_port_.starts_with("https://")) {
    result.error = BackendError{BackendErrorKind::Transport, "https endpoints are not supported by this build"};
    result.latency_s = seconds_since(start);
    return result;
  }

  const auto body = request_body(spec_, prompt).dump();
  httplib::Headers headers;
  if (const char* key = std::getenv(spec_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(spec_.timeout_s));
  double backoff = retry_.initial_backoff_s;

  for (int attempt = 0;; ++attempt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    const auto attempt_start = SteadyClock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    if (res) {
      if (res->status < 200 || res->status >= 300) {
        result.error = BackendError{BackendErrorKind::NonSuccessStatus,
                                    "HTTP " + std::to_string(res->status), res->status};
      } else if (auto text = parse_response_body(res->body)) {
        result.raw_text = std::move(*text);
        result.error.reset();
      } else {
        result.error = BackendError{BackendErrorKind::MalformedResponse, "response lacks choices[0].text",
                                    res->status};
      }
      break;
    }

    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && seconds_since(attempt_start) >= 0.9 * spec_.timeout_s);
    result.error = BackendError{timed_out ? BackendErrorKind::Timeout : BackendErrorKind::Transport,
                                httplib::to_string(err)};
    if (attempt >= spec_.max_retries) break;
    retry_.sleep(backoff);
    backoff *= 2.0;
  }
  result.latency_s = seconds_since(start);
  return result;
}

// ---------------------------------------------------------------------------
// Scripted mock

std::optional<MockEndpoint> parse_mock_endpoint(std::string_view endpoint) {
  if (!endpoint.starts_with("mock:")) return std::nullopt;
  endpoint.remove_prefix(5);
  MockEndpoint out;
  const auto q = endpoint.find('?');
  out.script_id = std::string(endpoint.substr(0, q));
  if (out.script_id.empty()) return std::nullopt;
  if (q == std::string_view::npos) return out;

  auto query = endpoint.substr(q + 1);
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto pair = query.substr(0, amp);
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    const auto key = pair.substr(0, eq);
    const auto value = std::string(pair.substr(eq + 1));
    try {
      if (key == "delay_ms") out.options.delay = std::chrono::milliseconds(std::stoll(value));
      else if (key == "seed") out.options.seed = std::stoull(value);
      else return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return out;
}

ScriptedCompletionClient::ScriptedCompletionClient(BackendSpec spec, std::vector<std::string> script,
                                                   MockOptions options)
    : spec_(std::move(spec)), script_(std::move(script)), options_(options), cursor_(options.start) {
  if (script_.empty()) throw ConfigError("mock backend '" + spec_.name + "' has an empty script");
  if (options_.seed) rng_.seed(*options_.seed);
}

CompletionResult ScriptedCompletionClient::complete(std::string_view prompt) {
  if (prompt.empty()) throw std::invalid_argument("prompt must not be empty");
  const auto start = SteadyClock::now();
  std::string line;
  {
    std::lock_guard lock(mu_);
    prompts_.emplace_back(prompt);
    const std::size_t index = options_.seed ? static_cast<std::size_t>(rng_() % script_.size())
                                            : cursor_++ % script_.size();
    line = script_[index];
  }
  if (options_.delay.count() > 0) std::this_thread::sleep_for(options_.delay);
  CompletionResult result;
  result.raw_text = std::move(line);
  result.latency_s = seconds_since(start);
  return result;
}

std::size_t ScriptedCompletionClient::calls() const {
  std::lock_guard lock(mu_);
  return prompts_.size();
}

std::vector<std::string> ScriptedCompletionClient::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

std::vector<std::string> ScriptLibrary::parse_script(std::string_view content) {
  std::vector<std::string> out;
  std::string current;
  bool any = false;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "%%") {
      out.push_back(text::trim(current));
      current.clear();
      any = false;
    } else {
      if (any) current.push_back('\n');
      current.append(line);
      any = true;
    }
    pos = end + 1;
  }
  if (!text::trim(current).empty()) out.push_back(text::trim(current));
  return out;
}

ScriptLibrary ScriptLibrary::load_dir(const std::filesystem::path& dir) {
  ScriptLibrary lib;
  if (!std::filesystem::is_directory(dir)) throw ConfigError("script directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    lib.add(entry.path().stem().string(), parse_script(text::read_file(entry.path().string())));
  }
  return lib;
}

void ScriptLibrary::add(std::string id, std::vector<std::string> lines) {
  if (lines.empty()) throw ConfigError("script '" + id + "' is empty");
  scripts_[std::move(id)] = std::move(lines);
}

const std::vector<std::string>* ScriptLibrary::find(std::string_view id) const {
  auto it = scripts_.find(id);
  return it == scripts_.end() ? nullptr : &it->second;
}

const std::vector<std::string>& ScriptLibrary::resolve(std::string_view id, std::string_view case_id) const {
  if (!case_id.empty()) {
    if (const auto* s = find(std::string(id) + "." + case_slug(case_id))) return *s;
  }
  if (const auto* s = find(id)) return *s;
  throw ConfigError("unknown mock script '" + std::string(id) + "'");
}

std::string case_slug(std::string_view case_id) {
  std::string out;
  for (char ch : text::normalize(case_id)) out.push_back(ch == ' ' ? '-' : ch);
  return out;
}

std::unique_ptr<CompletionClient> open_client(const BackendSpec& spec, const ScriptLibrary& scripts,
                                              std::string_view case_id) {
  spec.validate();
  if (spec.is_mock()) {
    auto mock = parse_mock_endpoint(spec.endpoint);
    if (!mock) throw ConfigError("malformed mock endpoint '" + spec.endpoint + "'");
    return std::make_unique<ScriptedCompletionClient>(spec, scripts.resolve(mock->script_id, case_id),
                                                      mock->options);
  }
  return std::make_unique<HttpCompletionClient>(spec);
}

}  // namespace buddy
