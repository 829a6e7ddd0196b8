#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace buddy {

struct BackendSpec {
  std::string name;      // model identifier sent on the wire
  std::string endpoint;  // "http://host:port[/prefix]" or "mock:<script-id>[?delay_ms=N&seed=S]"
  double timeout_s = 30.0;
  int max_retries = 2;
  std::string api_key_env = "BUDDY_BACKEND_API_KEY";

  /// Throws ConfigError when timeout <= 0, name is empty or retries < 0.
  void validate() const;
  bool is_mock() const { return endpoint.starts_with("mock:"); }
};

void to_json(nlohmann::json& j, const BackendSpec& s);
void from_json(const nlohmann::json& j, BackendSpec& s);

enum class BackendErrorKind { Timeout, Transport, NonSuccessStatus, MalformedResponse };

std::string_view to_string(BackendErrorKind kind);

struct BackendError {
  BackendErrorKind kind;
  std::string message;
  int status = 0;
};

struct CompletionResult {
  std::string raw_text;
  double latency_s = 0.0;
  std::optional<BackendError> error;

  bool ok() const { return !error.has_value(); }
};

/// Completion backend. Implementations never throw transport failures; they
/// are reported through CompletionResult::error.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual CompletionResult complete(std::string_view prompt) = 0;
  virtual const BackendSpec& spec() const = 0;
};

struct RetryPolicy {
  double initial_backoff_s = 0.5;
  /// Replaced in tests to avoid real sleeps.
  std::function<void(double)> sleep;
};

/// OpenAI-style `POST <endpoint>/v1/completions`. See docs/completion-wire.md.
class HttpCompletionClient final : public CompletionClient {
 public:
  explicit HttpCompletionClient(BackendSpec spec, RetryPolicy retry = {});

  CompletionResult complete(std::string_view prompt) override;
  const BackendSpec& spec() const override { return spec_; }

  /// The JSON request body for `prompt`.
  static nlohmann::json request_body(const BackendSpec& spec, std::string_view prompt);
  /// Extracts `choices[0].text`; nullopt for any other shape.
  static std::optional<std::string> parse_response_body(std::string_view body);

 private:
  BackendSpec spec_;
  RetryPolicy retry_;
  std::string scheme_host_port_;
  std::string path_;
};

struct MockOptions {
  std::chrono::milliseconds delay{0};
  /// When set, each call picks a script line with a seeded mt19937_64;
  /// otherwise lines are replayed in order, wrapping around.
  std::optional<std::uint64_t> seed;
  std::size_t start = 0;
};

/// Parsed form of "mock:<script-id>?delay_ms=N&seed=S".
struct MockEndpoint {
  std::string script_id;
  MockOptions options;
};

std::optional<MockEndpoint> parse_mock_endpoint(std::string_view endpoint);

/// Deterministic scripted backend. Thread-safe.
class ScriptedCompletionClient final : public CompletionClient {
 public:
  ScriptedCompletionClient(BackendSpec spec, std::vector<std::string> script, MockOptions options = {});

  CompletionResult complete(std::string_view prompt) override;
  const BackendSpec& spec() const override { return spec_; }

  std::size_t calls() const;
  /// Prompts received so far, in call order.
  std::vector<std::string> prompts() const;

 private:
  BackendSpec spec_;
  std::vector<std::string> script_;
  MockOptions options_;
  mutable std::mutex mu_;
  std::size_t cursor_;
  std::mt19937_64 rng_;
  std::vector<std::string> prompts_;
};

/// Named response scripts. A script file holds responses separated by lines
/// consisting of `%%`; the file stem is the script id.
class ScriptLibrary {
 public:
  static ScriptLibrary load_dir(const std::filesystem::path& dir);
  static std::vector<std::string> parse_script(std::string_view text);

  void add(std::string id, std::vector<std::string> lines);
  const std::vector<std::string>* find(std::string_view id) const;

  /// `<id>.<case-slug>` when present, else `<id>`. Throws ConfigError when
  /// neither exists.
  const std::vector<std::string>& resolve(std::string_view id, std::string_view case_id = {}) const;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> scripts_;
};

/// Lowercase, spaces to dashes: "Name Recognition 01" -> "name-recognition-01".
std::string case_slug(std::string_view case_id);

/// HTTP client for URL endpoints, scripted client for `mock:` endpoints.
std::unique_ptr<CompletionClient> open_client(const BackendSpec& spec, const ScriptLibrary& scripts,
                                              std::string_view case_id = {});

}  // namespace buddy
