#include <doctest.h>

#include <httplib.h>

#include <condition_variable>
#include <fstream>
#include <thread>

#include "buddy/conversation/transcript.hpp"
#include "buddy/service/chat_service.hpp"
#include "buddy/service/http_gateway.hpp"
#include "test_support.hpp"

using namespace buddy;
using nlohmann::json;

namespace {

ServiceConfig config() { return ServiceConfig::with_shipped_data(testing::data_dir()); }

std::shared_ptr<ScriptedCompletionClient> scripted(std::vector<std::string> lines) {
  return std::make_shared<ScriptedCompletionClient>(BackendSpec{"s", "mock:s"}, std::move(lines));
}

/// Blocks every completion until released.
class GateBackend final : public CompletionClient {
 public:
  CompletionResult complete(std::string_view) override {
    std::unique_lock lock(mu_);
    entered_ = true;
    cv_.notify_all();
    cv_.wait(lock, [&] { return open_; });
    return CompletionResult{testing::bot_json("Okay. Is it sunny?"), 0.0, std::nullopt};
  }
  const BackendSpec& spec() const override { return spec_; }
  void wait_entered() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return entered_; });
  }
  void open() {
    std::lock_guard lock(mu_);
    open_ = true;
    cv_.notify_all();
  }

 private:
  BackendSpec spec_{"gate", "mock:gate"};
  std::mutex mu_;
  std::condition_variable cv_;
  bool entered_ = false;
  bool open_ = false;
};

ServiceErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.code();
  }
  FAIL("expected ServiceError");
  return ServiceErrorCode::BadRequest;
}

}  // namespace

TEST_CASE("config loading") {
  const auto c = ServiceConfig::load(testing::data_dir() / "service.example.json");
  CHECK(c.topics_path == testing::data_dir() / "topics.json");
  CHECK(c.cache_threshold.threshold == 0.85);
  CHECK(c.backend.endpoint == "mock:buddy");
  CHECK(c.budget.hard_close_at == 13);
  auto j = json::parse(text::read_file((testing::data_dir() / "service.example.json").string()));
  j["cache"]["floor"] = 0.9;
  CHECK_THROWS_AS(ServiceConfig::from_json(j, testing::data_dir()), ConfigError);
  j = json::parse(text::read_file((testing::data_dir() / "service.example.json").string()));
  j["topics"] = "missing.json";
  CHECK_THROWS_AS(ServiceConfig::from_json(j, testing::data_dir()), ConfigError);
  CHECK_THROWS_AS(ServiceConfig::load("/nonexistent.json"), ConfigError);
}

TEST_CASE("create_session returns the opening line with its hints") {
  ChatService svc(config());
  const auto weather = svc.create_session("weather");
  CHECK(weather.message.text == "Hi, what's the weather like today?");
  CHECK(weather.message.hint_sentences.size() == 3);
  CHECK(weather.message.hint_words.size() == 4);
  CHECK_FALSE(weather.message.is_finished);
  CHECK(weather.session.state == SessionState::Open);
  CHECK(weather.session.persona == "Buddy");
  CHECK(svc.create_session("greetings").message.text == "Hi there! What's your name?");
  CHECK(svc.create_session("weather", std::string("Mina")).session.persona == "Mina");
  CHECK(svc.create_session("weather", std::nullopt, TemplateVersion::V4).session.template_version ==
        TemplateVersion::V4);
  CHECK(code_of([&] { svc.create_session("astronomy"); }) == ServiceErrorCode::UnknownTopic);
  CHECK(code_of([&] { svc.create_session("weather", std::string(" ")); }) == ServiceErrorCode::BadRequest);
  CHECK(svc.list_topics().size() == 7);
  CHECK(svc.metrics().sessions == 4);
}

TEST_CASE("bye closes the session; closed sessions reject messages") {
  ChatService svc(config());
  const auto s = svc.create_session("weather");
  const auto r = svc.post_message(s.session.id, "bye");
  CHECK(r.message.is_finished);
  CHECK(r.state == SessionState::Closed);
  CHECK(code_of([&] { svc.post_message(s.session.id, "hello"); }) == ServiceErrorCode::SessionClosed);
  CHECK(code_of([&] { svc.post_message("ffff", "hello"); }) == ServiceErrorCode::UnknownSession);
}

TEST_CASE("exact repeat in the same context is served from the cache") {
  auto backend = scripted({testing::bot_json("Sunny days are nice. Do you like them?")});
  ChatService svc(config(), backend);
  const auto a = svc.create_session("weather");
  const auto b = svc.create_session("weather");
  CHECK(svc.post_message(a.session.id, "It is sunny").served_from == ServedFrom::Backend);
  CHECK(svc.post_message(b.session.id, "it is SUNNY!").served_from == ServedFrom::Cache);
  CHECK(backend->calls() == 1);
  // A different template is a different context.
  const auto c = svc.create_session("weather", std::nullopt, TemplateVersion::V2);
  CHECK(svc.post_message(c.session.id, "It is sunny").served_from == ServedFrom::Backend);
}

TEST_CASE("off-topic input adds the redirect directive") {
  auto backend = scripted({testing::bot_json("Baseball is fun. Is it sunny today?")});
  ChatService svc(config(), backend);
  std::vector<std::string> prompts;
  svc.set_prompt_observer([&](const std::string&, const std::string& p) { prompts.push_back(p); });
  const auto s = svc.create_session("weather");
  const auto r = svc.post_message(s.session.id, "I like baseball");
  CHECK(r.off_topic);
  CHECK(svc.summarize(s.session.id).off_topic_count == 1);
  REQUIRE(prompts.size() == 1);
  CHECK(prompts[0].find("gently steer the conversation back") != std::string::npos);
  CHECK(prompts[0].find("\"I like baseball\"") != std::string::npos);
  CHECK(prompts[0].find("### User: I like baseball\n") != std::string::npos);
  CHECK(backend->prompts().back() == prompts[0]);

  svc.post_message(s.session.id, "It is sunny");
  CHECK(svc.summarize(s.session.id).off_topic_count == 1);
  CHECK(prompts.back().find("gently steer") == std::string::npos);
}

TEST_CASE("toxic input gets the de-escalation directive and bypasses the cache") {
  auto backend = scripted({testing::bot_json("I feel sad. Let's talk about the weather. Is it sunny?")});
  ChatService svc(config(), backend);
  std::string prompt;
  svc.set_prompt_observer([&](const std::string&, const std::string& p) { prompt = p; });
  const auto a = svc.create_session("weather");
  const auto b = svc.create_session("weather");
  // Three sentences: rejected twice, so the fallback line is served.
  const auto r = svc.post_message(a.session.id, "fuck you!");
  CHECK(r.toxic);
  CHECK(prompt.find("rude or unkind words") != std::string::npos);
  CHECK(r.state == SessionState::Open);

  auto ok = scripted({testing::bot_json("I don't understand. Is it sunny?")});
  ChatService svc2(config(), ok);
  const auto c = svc2.create_session("weather");
  const auto d = svc2.create_session("weather");
  CHECK(svc2.post_message(c.session.id, "fuck you").served_from == ServedFrom::Backend);
  CHECK(svc2.post_message(d.session.id, "fuck you").served_from == ServedFrom::Backend);
  CHECK(ok->calls() == 2);
  CHECK(svc2.metrics().cache.entries == 0);
  (void)b;
}

TEST_CASE("rejected output is regenerated once, then the fallback line is served") {
  auto bad = scripted({testing::bot_json("You are stupid."), testing::bot_json("Nice. Is it windy?")});
  ChatService svc(config(), bad);
  const auto s = svc.create_session("weather");
  const auto r = svc.post_message(s.session.id, "It is cloudy");
  CHECK_FALSE(r.fallback);
  CHECK(r.message.text == "Nice. Is it windy?");
  CHECK(bad->calls() == 2);

  auto worse = scripted({testing::bot_json("You are stupid."), "garbage"});
  ChatService svc2(config(), worse);
  const auto s2 = svc2.create_session("weather");
  const auto r2 = svc2.post_message(s2.session.id, "It is cloudy");
  CHECK(r2.fallback);
  CHECK(r2.message.text == "Let's talk about the weather. Is it sunny today?");
  CHECK(r2.message.hint_sentences.size() == 3);
  CHECK(worse->calls() == 2);
  CHECK(svc2.metrics().fallbacks == 1);
  CHECK(svc2.metrics().cache.entries == 0);
}

TEST_CASE("an unparseable completion carrying <end> still closes the session") {
  auto ending = scripted({"Goodbye! <end>", "still not json"});
  ChatService svc(config(), ending);
  const auto s = svc.create_session("weather");
  const auto r = svc.post_message(s.session.id, "It is cloudy");
  CHECK(r.fallback);
  CHECK(r.message.is_finished);
  CHECK(r.state == SessionState::Closed);
}

TEST_CASE("backend failure leaves the session untouched") {
  auto c = config();
  ChatService svc(c, std::make_shared<HttpCompletionClient>(BackendSpec{"down", "http://127.0.0.1:1", 0.5, 0},
                                                             RetryPolicy{0.0, [](double) {}}));
  const auto s = svc.create_session("weather");
  CHECK(code_of([&] { svc.post_message(s.session.id, "It is sunny"); }) == ServiceErrorCode::BackendError);
  const auto after = svc.summarize(s.session.id);
  CHECK(after.state == SessionState::Open);
  CHECK(after.turn_count == 1);
}

TEST_CASE("bad requests") {
  ChatService svc(config());
  const auto s = svc.create_session("weather");
  CHECK(code_of([&] { svc.post_message(s.session.id, "   "); }) == ServiceErrorCode::BadRequest);
  CHECK(code_of([&] { svc.post_message(s.session.id, std::string(5000, 'a')); }) == ServiceErrorCode::BadRequest);
}

TEST_CASE("feedback") {
  auto backend = std::make_shared<testing::CountingBackend>();
  ChatService svc(config(), backend);
  const auto a = svc.create_session("weather");
  const auto b = svc.create_session("weather");
  const auto first = svc.post_message(a.session.id, "what is the weather like today");
  CHECK(first.served_from == ServedFrom::Backend);
  const auto near = svc.post_message(b.session.id, "what is the weather like today please");
  REQUIRE(near.served_from == ServedFrom::Similar);

  CHECK(svc.submit_feedback(a.session.id, first.turn_index, Feedback::Negative) == doctest::Approx(0.85));
  CHECK(svc.submit_feedback(b.session.id, near.turn_index, Feedback::Negative) == doctest::Approx(0.86));
  CHECK(svc.metrics().cache.threshold == doctest::Approx(0.86));
  CHECK(svc.get_session(b.session.id).turns[near.turn_index].feedback == Feedback::Negative);
  CHECK(code_of([&] { svc.submit_feedback(a.session.id, 1, Feedback::Positive); }) == ServiceErrorCode::UnknownTurn);
  CHECK(code_of([&] { svc.submit_feedback(a.session.id, 99, Feedback::Positive); }) == ServiceErrorCode::UnknownTurn);
  // Opening turn is a bot turn without a cache entry.
  CHECK(svc.submit_feedback(a.session.id, 0, Feedback::Positive) == doctest::Approx(0.86));
}

TEST_CASE("a second in-flight message for the same session is Busy") {
  auto gate = std::make_shared<GateBackend>();
  ChatService svc(config(), gate);
  const auto s = svc.create_session("weather");
  const auto other = svc.create_session("time");
  std::thread first([&] { svc.post_message(s.session.id, "It is sunny"); });
  gate->wait_entered();
  CHECK(code_of([&] { svc.post_message(s.session.id, "Hello again"); }) == ServiceErrorCode::Busy);
  gate->open();
  first.join();
  CHECK(svc.summarize(s.session.id).user_turns == 1);
  CHECK(svc.post_message(other.session.id, "It is three").state == SessionState::Open);
}

TEST_CASE("turn budget through the service") {
  auto backend = std::make_shared<testing::CountingBackend>();
  ChatService svc(config(), backend);
  std::string prompt;
  svc.set_prompt_observer([&](const std::string&, const std::string& p) { prompt = p; });
  const auto s = svc.create_session("weather");
  PostMessageResult r;
  for (int i = 1; i <= 13; ++i) {
    r = svc.post_message(s.session.id, "It is sunny number " + std::to_string(i));
    if (i == 10) {
      CHECK(r.state == SessionState::SoftClosing);
      CHECK(prompt.find("almost over") != std::string::npos);
    }
    if (i < 13) CHECK_FALSE(r.message.is_finished);
  }
  CHECK(r.state == SessionState::Closed);
  CHECK(r.message.is_finished);
  CHECK(prompt.find("set true to `is_finished`.\n") != std::string::npos);
}

TEST_CASE("transcript export round-trips turn counts") {
  ChatService svc(config());
  const auto s = svc.create_session("weather");
  CHECK(count_transcript_blocks(svc.export_transcript(s.session.id)) == 1);
  svc.post_message(s.session.id, "It is sunny");
  svc.post_message(s.session.id, "I like it");
  svc.post_message(s.session.id, "bye");
  const auto text = svc.export_transcript(s.session.id);
  CHECK(count_transcript_blocks(text) == 7);
  CHECK(count_transcript_blocks(text) == svc.get_session(s.session.id).turns.size());
  CHECK(text == svc.export_transcript(s.session.id));
  CHECK(code_of([&] { svc.export_transcript("abc"); }) == ServiceErrorCode::UnknownSession);
}

TEST_CASE("state survives a restart") {
  testing::TempDir dir("svc");
  auto c = config();
  c.persistence_dir = dir.path();
  std::string id_a, id_b, transcript_a;
  std::size_t cache_entries = 0;
  double threshold = 0;
  {
    ChatService svc(c, std::make_shared<testing::CountingBackend>());
    id_a = svc.create_session("weather", std::string("Mina")).session.id;
    id_b = svc.create_session("food").session.id;
    svc.post_message(id_a, "what is the weather like today");
    svc.post_message(id_a, "I like baseball");
    svc.post_message(id_b, "I like pizza");
    svc.post_message(id_b, "bye");
    const auto id_c = svc.create_session("weather").session.id;
    const auto near = svc.post_message(id_c, "what is the weather like today please");
    REQUIRE(near.served_from == ServedFrom::Similar);
    svc.submit_feedback(id_c, near.turn_index, Feedback::Negative);
    transcript_a = svc.export_transcript(id_a);
    cache_entries = svc.metrics().cache.entries;
    threshold = svc.metrics().cache.threshold;
  }
  ChatService again(c, std::make_shared<testing::CountingBackend>());
  CHECK(again.metrics().sessions == 3);
  CHECK(again.metrics().cache.entries == cache_entries);
  CHECK(again.metrics().cache.threshold == doctest::Approx(threshold));
  CHECK(again.summarize(id_a).user_turns == 2);
  CHECK(again.summarize(id_a).off_topic_count == 1);
  CHECK(again.summarize(id_a).persona == "Mina");
  CHECK(again.summarize(id_b).state == SessionState::Closed);
  CHECK(again.export_transcript(id_a) == transcript_a);
  CHECK(code_of([&] { again.post_message(id_b, "hi"); }) == ServiceErrorCode::SessionClosed);
  CHECK(again.post_message(id_a, "It is sunny").state == SessionState::Open);
}

TEST_CASE("HTTP gateway") {
  auto backend = scripted({testing::bot_json("Nice. Is it sunny?")});
  ChatService svc(config(), backend);
  HttpGateway gateway(svc);
  const int port = gateway.bind_any("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { gateway.serve(); });
  httplib::Client http("127.0.0.1", port);
  for (int i = 0; i < 100 && !http.Get("/v1/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  auto health = http.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["status"] == "ok");

  auto topics = http.Get("/v1/topics");
  REQUIRE(topics);
  const auto tj = json::parse(topics->body)["topics"];
  REQUIRE(tj.size() == 7);
  CHECK(tj[1]["id"] == "weather");

  auto created = http.Post("/v1/sessions", R"({"topic_id": "weather", "persona": "Mina"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto cj = json::parse(created->body);
  const std::string id = cj["session"]["id"];
  CHECK(cj["message"]["text"] == "Hi, what's the weather like today?");
  CHECK(cj["message"]["hint_sentences"].size() == 3);
  CHECK(cj["session"]["persona"] == "Mina");

  auto posted = http.Post("/v1/sessions/" + id + "/messages", R"({"text": "It is sunny"})", "application/json");
  REQUIRE(posted);
  CHECK(posted->status == 200);
  const auto pj = json::parse(posted->body);
  CHECK(pj["served_from"] == "backend");
  CHECK(pj["state"] == "open");
  CHECK(pj["message"].get<BotMessage>().text == "Nice. Is it sunny?");
  const int turn = pj["turn_index"];

  auto fb = http.Post("/v1/sessions/" + id + "/feedback",
                      json{{"turn_index", turn}, {"signal", "positive"}}.dump(), "application/json");
  REQUIRE(fb);
  CHECK(fb->status == 200);
  CHECK(json::parse(fb->body)["acknowledged"] == true);

  auto bad_turn = http.Post("/v1/sessions/" + id + "/feedback", R"({"turn_index": 1, "signal": "negative"})",
                            "application/json");
  REQUIRE(bad_turn);
  CHECK(bad_turn->status == 404);
  CHECK(json::parse(bad_turn->body)["error"]["code"] == "UnknownTurn");

  auto session = http.Get("/v1/sessions/" + id);
  REQUIRE(session);
  CHECK(json::parse(session->body)["session"]["user_turns"] == 1);

  auto bye = http.Post("/v1/sessions/" + id + "/messages", R"({"text": "bye"})", "application/json");
  REQUIRE(bye);
  CHECK(json::parse(bye->body)["message"]["is_finished"] == true);
  auto closed = http.Post("/v1/sessions/" + id + "/messages", R"({"text": "hi"})", "application/json");
  REQUIRE(closed);
  CHECK(closed->status == 409);

  auto transcript = http.Get("/v1/sessions/" + id + "/transcript");
  REQUIRE(transcript);
  CHECK(transcript->status == 200);
  CHECK(count_transcript_blocks(transcript->body) == 5);

  auto unknown = http.Get("/v1/sessions/0123456789abcdef");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK(json::parse(unknown->body)["error"]["code"] == "UnknownSession");

  auto no_topic = http.Post("/v1/sessions", R"({"topic_id": "space"})", "application/json");
  REQUIRE(no_topic);
  CHECK(no_topic->status == 404);
  auto malformed = http.Post("/v1/sessions", "not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);
  auto missing = http.Post("/v1/sessions", "{}", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 400);

  auto metrics = http.Get("/v1/metrics");
  REQUIRE(metrics);
  const auto mj = json::parse(metrics->body);
  CHECK(mj["cache"]["backend_calls"] == 2);
  CHECK(mj["sessions"] == 1);

  gateway.stop();
  server.join();
}
