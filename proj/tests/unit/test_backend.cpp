#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "buddy/backend/backend.hpp"
#include "buddy/common/error.hpp"
#include "test_support.hpp"

using namespace buddy;
using nlohmann::json;

namespace {

/// Local completion server on an ephemeral port.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RetryPolicy no_sleep(std::vector<double>* sleeps = nullptr) {
  return RetryPolicy{0.5, [sleeps](double s) {
                       if (sleeps) sleeps->push_back(s);
                     }};
}

}  // namespace

TEST_CASE("backend spec validation and JSON") {
  BackendSpec ok{"m", "http://x"};
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS_AS((BackendSpec{"", "http://x"}.validate()), ConfigError);
  CHECK_THROWS_AS((BackendSpec{"m", "http://x", 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((BackendSpec{"m", "http://x", 1.0, -1}.validate()), ConfigError);
  const auto j = json::parse(R"({"name": "n", "endpoint": "mock:a", "timeout": 5})");
  const auto spec = j.get<BackendSpec>();
  CHECK(spec.timeout_s == 5.0);
  CHECK(spec.max_retries == 2);
  CHECK(spec.api_key_env == "BUDDY_BACKEND_API_KEY");
  CHECK(spec.is_mock());
  CHECK(json(spec).get<BackendSpec>().endpoint == "mock:a");
}

TEST_CASE("request body and response extraction") {
  const auto body = HttpCompletionClient::request_body(BackendSpec{"llama", "http://x"}, "hello");
  CHECK(body == json::parse(
                    R"({"model": "llama", "prompt": "hello", "max_tokens": 256, "temperature": 0.7, "stop": ["### User:"]})"));
  CHECK(HttpCompletionClient::parse_response_body(R"({"choices": [{"text": "abc"}]})") == "abc");
  CHECK_FALSE(HttpCompletionClient::parse_response_body(R"({"choices": []})").has_value());
  CHECK_FALSE(HttpCompletionClient::parse_response_body(R"({"choices": [{"text": 3}]})").has_value());
  CHECK_FALSE(HttpCompletionClient::parse_response_body("nope").has_value());
}

TEST_CASE("HTTP client posts the documented body and reads choices[0].text") {
  json seen;
  std::string auth;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices": [{"text": "{\"text\": \"Hi.\"}"}]})", "application/json");
  });
  ::setenv("BUDDY_TEST_KEY", "secret", 1);
  BackendSpec spec{"model-x", server.endpoint(), 5.0, 0, "BUDDY_TEST_KEY"};
  HttpCompletionClient client(spec, no_sleep());
  const auto r = client.complete("### System: hi\n");
  REQUIRE(r.ok());
  CHECK(r.raw_text == "{\"text\": \"Hi.\"}");
  CHECK(seen.at("model") == "model-x");
  CHECK(seen.at("prompt") == "### System: hi\n");
  CHECK(auth == "Bearer secret");
  CHECK(r.latency_s >= 0.0);
  ::unsetenv("BUDDY_TEST_KEY");
}

TEST_CASE("HTTP client reports status and malformed bodies without retrying") {
  int hits = 0;
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    if (hits == 1) {
      res.status = 503;
      res.set_content("busy", "text/plain");
    } else {
      res.set_content(R"({"unexpected": true})", "application/json");
    }
  });
  HttpCompletionClient client(BackendSpec{"m", server.endpoint(), 5.0, 3}, no_sleep());
  const auto first = client.complete("p");
  REQUIRE_FALSE(first.ok());
  CHECK(first.error->kind == BackendErrorKind::NonSuccessStatus);
  CHECK(first.error->status == 503);
  const auto second = client.complete("p");
  REQUIRE_FALSE(second.ok());
  CHECK(second.error->kind == BackendErrorKind::MalformedResponse);
  CHECK(hits == 2);
}

TEST_CASE("transport failures retry with exponential backoff") {
  std::vector<double> sleeps;
  HttpCompletionClient client(BackendSpec{"m", "http://127.0.0.1:1", 1.0, 2}, no_sleep(&sleeps));
  const auto r = client.complete("p");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == BackendErrorKind::Transport);
  CHECK(sleeps == std::vector<double>{0.5, 1.0});
}

TEST_CASE("slow backend maps to Timeout") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(700));
    res.set_content(R"({"choices": [{"text": "late"}]})", "application/json");
  });
  HttpCompletionClient client(BackendSpec{"m", server.endpoint(), 0.3, 0}, no_sleep());
  const auto r = client.complete("p");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == BackendErrorKind::Timeout);
}

TEST_CASE("https is refused") {
  HttpCompletionClient client(BackendSpec{"m", "https://example.invalid", 1.0, 0}, no_sleep());
  const auto r = client.complete("p");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == BackendErrorKind::Transport);
}

TEST_CASE("mock endpoint parsing") {
  const auto plain = parse_mock_endpoint("mock:judge");
  REQUIRE(plain.has_value());
  CHECK(plain->script_id == "judge");
  CHECK_FALSE(plain->options.seed.has_value());
  const auto full = parse_mock_endpoint("mock:a?delay_ms=5&seed=42");
  REQUIRE(full.has_value());
  CHECK(full->options.delay.count() == 5);
  CHECK(full->options.seed == 42u);
  CHECK_FALSE(parse_mock_endpoint("mock:").has_value());
  CHECK_FALSE(parse_mock_endpoint("mock:a?bogus=1").has_value());
  CHECK_FALSE(parse_mock_endpoint("mock:a?seed=x").has_value());
  CHECK_FALSE(parse_mock_endpoint("http://a").has_value());
}

TEST_CASE("scripted client: sequential wrap-around and seeded picks") {
  BackendSpec spec{"m", "mock:s"};
  ScriptedCompletionClient seq(spec, {"a", "b", "c"}, MockOptions{{}, std::nullopt, 1});
  CHECK(seq.complete("p").raw_text == "b");
  CHECK(seq.complete("p").raw_text == "c");
  CHECK(seq.complete("q").raw_text == "a");
  CHECK(seq.calls() == 3);
  CHECK(seq.prompts().back() == "q");

  std::mt19937_64 oracle(9);
  ScriptedCompletionClient seeded(spec, {"a", "b", "c", "d", "e"}, MockOptions{{}, 9u, 0});
  const std::vector<std::string> lines = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 20; ++i) CHECK(seeded.complete("p").raw_text == lines[oracle() % 5]);
  CHECK_THROWS_AS(ScriptedCompletionClient(spec, {}), ConfigError);
}

TEST_CASE("script files and per-case resolution") {
  const auto lines = ScriptLibrary::parse_script("first\nline two\n%%\n second \n%%\n\n");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "first\nline two");
  CHECK(lines[1] == "second");
  CHECK(case_slug("Name Recognition 01") == "name-recognition-01");

  ScriptLibrary lib;
  lib.add("cand", {"generic"});
  lib.add("cand.name-recognition-01", {"specific"});
  CHECK(lib.resolve("cand", "Name Recognition 01").front() == "specific");
  CHECK(lib.resolve("cand", "First Questions").front() == "generic");
  CHECK_THROWS_AS(lib.resolve("missing"), ConfigError);

  const auto shipped = ScriptLibrary::load_dir(testing::data_dir() / "scripts");
  CHECK(shipped.find("judge") != nullptr);
  CHECK(shipped.find("buddy") != nullptr);
  auto client = open_client(BackendSpec{"j", "mock:judge"}, shipped);
  CHECK(client->complete("p").ok());
  CHECK_THROWS_AS(open_client(BackendSpec{"j", "mock:"}, shipped), ConfigError);
}
