#include "buddy/service/chat_service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "buddy/common/text.hpp"
#include "buddy/conversation/transcript.hpp"

namespace buddy {
namespace {

using nlohmann::json;

constexpr AppendLog::Magic kSessionMagic = {'B', 'D', 'Y', 'S'};
constexpr std::uint8_t kSessionLogVersion = 1;
constexpr std::size_t kMaxUserTextBytes = 2000;

std::int64_t to_ms(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

Clock::time_point from_ms(std::int64_t ms) {
  return Clock::time_point(std::chrono::duration_cast<Clock::duration>(std::chrono::milliseconds(ms)));
}

BotMessage opening_message(const Topic& t) {
  return BotMessage{t.opening_line, t.opening_hint_sentences, t.opening_hint_words, false};
}

BotMessage fallback_message(const Topic& t) {
  return BotMessage{t.fallback_line, t.opening_hint_sentences, t.opening_hint_words, false};
}

json turn_record(const Session& s, const TurnSignals& signals) {
  const Turn& user = s.turns[s.turns.size() - 2];
  const Turn& bot = s.turns.back();
  json rec{{"op", "turn"},
           {"user", user.content},
           {"off_topic", signals.off_topic},
           {"termination", signals.termination},
           {"raw", bot.content},
           {"message", *bot.parsed},
           {"ts", to_ms(bot.timestamp)}};
  rec["served_from"] = bot.served_from ? json(to_string(*bot.served_from)) : json(nullptr);
  rec["cache_ref"] = bot.cache_ref ? json{{"q", bot.cache_ref->normalized_query}, {"ctx", bot.cache_ref->context}}
                                   : json(nullptr);
  return rec;
}

SessionSummary summary_of(const Session& s) {
  SessionSummary out;
  out.id = s.id;
  out.topic_id = s.topic_id;
  out.persona = s.persona;
  out.template_version = s.template_version;
  out.state = s.state;
  out.user_turns = s.user_turns();
  out.off_topic_count = s.off_topic_count;
  out.turn_count = s.turns.size();
  return out;
}

}  // namespace

std::string_view to_string(ServiceErrorCode code) {
  switch (code) {
    case ServiceErrorCode::BadRequest: return "BadRequest";
    case ServiceErrorCode::UnknownTopic: return "UnknownTopic";
    case ServiceErrorCode::UnknownSession: return "UnknownSession";
    case ServiceErrorCode::UnknownTurn: return "UnknownTurn";
    case ServiceErrorCode::SessionClosed: return "SessionClosed";
    case ServiceErrorCode::Busy: return "Busy";
    case ServiceErrorCode::BackendError: return "BackendError";
  }
  return "?";
}

int http_status(ServiceErrorCode code) {
  switch (code) {
    case ServiceErrorCode::BadRequest: return 400;
    case ServiceErrorCode::UnknownTopic:
    case ServiceErrorCode::UnknownSession:
    case ServiceErrorCode::UnknownTurn: return 404;
    case ServiceErrorCode::SessionClosed: return 409;
    case ServiceErrorCode::Busy: return 429;
    case ServiceErrorCode::BackendError: return 502;
  }
  return 500;
}

struct ChatService::Slot {
  std::mutex mu;
  Session session;
  std::unique_ptr<AppendLog> log;
};

ChatService::ChatService(ServiceConfig config, std::shared_ptr<CompletionClient> backend)
    : config_(std::move(config)),
      topics_(TopicCatalog::load(config_.topics_path)),
      templates_(TemplateStore::load(config_.templates_dir)),
      lexicon_(Lexicon::load(config_.lexicon_path)),
      termination_(TerminationLexicon::defaults()),
      embedder_(std::make_shared<TrigramEmbedder>(config_.embedding_dimension)),
      off_topic_(*embedder_),
      backend_(std::move(backend)),
      id_rng_(std::random_device{}()) {
  config_.validate();
  for (const auto& t : topics_.topics()) {
    if (!check_output(fallback_message(t), lexicon_, config_.max_word_length).ok) {
      throw ConfigError("fallback line of topic '" + t.id + "' fails the output checks");
    }
  }
  if (!backend_) {
    auto scripts = config_.scripts_dir.empty() ? ScriptLibrary{} : ScriptLibrary::load_dir(config_.scripts_dir);
    backend_ = open_client(config_.backend, scripts);
  }
  CacheConfig cache_config;
  cache_config.capacity = config_.cache_capacity;
  cache_config.controller = config_.cache_threshold;
  if (!config_.persistence_dir.empty()) cache_config.log_path = config_.persistence_dir / "cache.log";
  cache_ = std::make_unique<SemanticCache>(cache_config, embedder_);
  replay_sessions();
}

ChatService::~ChatService() = default;

void ChatService::replay_sessions() {
  if (config_.persistence_dir.empty()) return;
  const auto dir = config_.persistence_dir / "sessions";
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".log") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    auto slot = std::make_shared<Slot>();
    slot->log = std::make_unique<AppendLog>(file, kSessionMagic, kSessionLogVersion);
    bool created = false;
    for (const auto& payload : slot->log->replayed()) {
      const auto rec = json::parse(payload);
      const auto op = rec.at("op").get<std::string>();
      if (op == "create") {
        auto version = parse_template_version(rec.at("template").get<std::string>());
        if (!version) throw ConfigError("session log " + file.string() + " names an unknown template");
        slot->session = start_session(rec.at("id").get<std::string>(), rec.at("topic").get<std::string>(),
                                      rec.at("persona").get<std::string>(), *version,
                                      rec.at("opening").get<BotMessage>(), from_ms(rec.at("ts").get<std::int64_t>()));
        created = true;
      } else if (op == "turn" && created) {
        BotReply reply;
        reply.raw = rec.at("raw").get<std::string>();
        reply.message = rec.at("message").get<BotMessage>();
        if (!rec.at("served_from").is_null()) {
          reply.served_from = parse_served_from(rec.at("served_from").get<std::string>());
        }
        if (const auto& ref = rec.at("cache_ref"); !ref.is_null()) {
          reply.cache_ref = CacheRef{ref.at("q").get<std::string>(), ref.at("ctx").get<std::uint64_t>()};
        }
        const TurnSignals signals{rec.at("off_topic").get<bool>(), rec.at("termination").get<bool>()};
        advance_session(slot->session, rec.at("user").get<std::string>(), std::move(reply), signals, config_.budget,
                        from_ms(rec.at("ts").get<std::int64_t>()));
      } else if (op == "feedback" && created) {
        const auto i = rec.at("turn").get<std::size_t>();
        auto signal = parse_feedback(rec.at("signal").get<std::string>());
        if (i < slot->session.turns.size() && signal) slot->session.turns[i].feedback = *signal;
      }
    }
    if (!created) {
      spdlog::warn("session log {} has no create record; skipped", file.string());
      continue;
    }
    sessions_[slot->session.id] = slot;
  }
  spdlog::info("replayed {} sessions and {} cache entries", sessions_.size(), cache_->size());
}

std::string ChatService::new_session_id() {
  std::lock_guard lock(id_mu_);
  for (;;) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
    std::shared_lock sessions_lock(sessions_mu_);
    if (!sessions_.count(buf)) return buf;
  }
}

std::shared_ptr<ChatService::Slot> ChatService::slot(const std::string& session_id) const {
  std::shared_lock lock(sessions_mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw ServiceError(ServiceErrorCode::UnknownSession, "unknown session '" + session_id + "'");
  }
  return it->second;
}

const Topic& ChatService::topic_of(const Session& s) const {
  const Topic* t = topics_.find(s.topic_id);
  if (!t) throw ServiceError(ServiceErrorCode::UnknownTopic, "unknown topic '" + s.topic_id + "'");
  return *t;
}

CreateSessionResult ChatService::create_session(const std::string& topic_id, std::optional<std::string> persona,
                                                 std::optional<TemplateVersion> version) {
  const Topic* topic = topics_.find(topic_id);
  if (!topic) throw ServiceError(ServiceErrorCode::UnknownTopic, "unknown topic '" + topic_id + "'");
  std::string name = persona ? text::trim(*persona) : std::string("Buddy");
  if (name.empty()) throw ServiceError(ServiceErrorCode::BadRequest, "persona must not be empty");
  const auto v = version.value_or(config_.default_template);
  if (!templates_.contains(v)) throw ServiceError(ServiceErrorCode::BadRequest, "template not loaded");

  auto slot = std::make_shared<Slot>();
  slot->session = start_session(new_session_id(), topic->id, name, v, opening_message(*topic));
  const auto& s = slot->session;
  if (!config_.persistence_dir.empty()) {
    slot->log = std::make_unique<AppendLog>(config_.persistence_dir / "sessions" / (s.id + ".log"), kSessionMagic,
                                            kSessionLogVersion);
    slot->log->append(json{{"op", "create"},
                           {"id", s.id},
                           {"topic", s.topic_id},
                           {"persona", s.persona},
                           {"template", to_string(s.template_version)},
                           {"opening", *s.turns.front().parsed},
                           {"ts", to_ms(s.turns.front().timestamp)}}
                          .dump());
  }
  CreateSessionResult out{summary_of(s), *s.turns.front().parsed};
  std::unique_lock lock(sessions_mu_);
  sessions_[s.id] = std::move(slot);
  return out;
}

void ChatService::notify(const std::string& session_id, const std::string& prompt) {
  PromptObserver observer;
  {
    std::lock_guard lock(observer_mu_);
    observer = observer_;
  }
  if (observer) observer(session_id, prompt);
}

void ChatService::set_prompt_observer(PromptObserver observer) {
  std::lock_guard lock(observer_mu_);
  observer_ = std::move(observer);
}

BotReply ChatService::generate(Slot& slot, const Topic& topic, const std::string& user_text,
                               const TurnSignals& signals, bool toxic, PostMessageResult& result) {
  const Session& s = slot.session;
  std::vector<Turn> history = s.turns;
  Turn pending;
  pending.speaker = Speaker::User;
  pending.content = user_text;
  history.push_back(std::move(pending));

  const int next_user_turns = s.user_turns() + 1;
  std::string mode;
  std::string directive;
  if (toxic) {
    mode = "toxic";
    directive = build_deescalation_directive(topic);
  } else if (signals.termination || next_user_turns >= config_.budget.hard_close_at) {
    mode = "closing";
    directive = build_closing_directive();
  } else if (signals.off_topic) {
    mode = "redirect";
    directive = build_redirect_directive(topic, user_text);
  } else if (next_user_turns >= config_.budget.soft_close_at) {
    mode = "wrap_up";
    directive = build_wrap_up_directive(topic);
  }
  const std::string prompt = render_prompt(templates_.get(s.template_version), topic, s.persona, history) + directive;

  // The directive changes the expected answer, so it is part of the context.
  std::string last_bot = s.last_bot_text();
  if (!mode.empty()) last_bot += "\x1f" + mode;
  const auto key = make_cache_key(user_text, context_fingerprint(topic.id, s.template_version, last_bot));

  const auto passes = [&](const BotMessage& m) { return check_output(m, lexicon_, config_.max_word_length).ok; };
  // Replies to toxic input are never shared through the cache.
  const ResponseFilter accept = toxic ? ResponseFilter([](const BotMessage&) { return false; }) : ResponseFilter(passes);

  // A `<end>` from any attempt closes the session, whatever reply is served.
  bool end_marker = false;
  for (int attempt = 0; attempt < 2; ++attempt) {
    notify(s.id, prompt);
    ResolveResult r;
    try {
      r = (attempt == 0 && !toxic) ? cache_->resolve(key, prompt, *backend_, accept)
                                   : cache_->regenerate(key, prompt, *backend_, accept);
    } catch (const ResolveError& e) {
      if (e.backend_error()) throw ServiceError(ServiceErrorCode::BackendError, e.what());
      end_marker = end_marker || e.end_marker();
      spdlog::debug("session {}: unusable completion ({})", s.id, e.what());
      continue;
    }
    end_marker = end_marker || r.raw.find("<end>") != std::string::npos;
    if (const auto verdict = check_output(r.message, lexicon_, config_.max_word_length); !verdict.ok) {
      spdlog::debug("session {}: reply rejected ({} {})", s.id, to_string(verdict.reason), verdict.detail);
      continue;
    }
    BotReply reply;
    reply.raw = std::move(r.raw);
    reply.message = std::move(r.message);
    reply.message.is_finished = reply.message.is_finished || end_marker;
    reply.served_from = r.served_from;
    if (r.served_from != ServedFrom::Backend || r.stored) {
      reply.cache_ref = CacheRef{r.served_key.normalized_query, r.served_key.context};
    }
    return reply;
  }

  ++fallbacks_;
  result.fallback = true;
  BotReply reply;
  reply.message = fallback_message(topic);
  reply.message.is_finished = end_marker;
  reply.raw = json(reply.message).dump();
  reply.served_from = ServedFrom::Backend;
  return reply;
}

PostMessageResult ChatService::post_message(const std::string& session_id, const std::string& user_text) {
  auto s = slot(session_id);
  std::unique_lock lock(s->mu, std::try_to_lock);
  if (!lock.owns_lock()) throw ServiceError(ServiceErrorCode::Busy, "session is handling another message");
  if (s->session.state == SessionState::Closed) throw ServiceError(ServiceErrorCode::SessionClosed, "session is closed");

  const std::string input = text::trim(user_text);
  if (input.empty()) throw ServiceError(ServiceErrorCode::BadRequest, "message text is empty");
  if (input.size() > kMaxUserTextBytes) throw ServiceError(ServiceErrorCode::BadRequest, "message text is too long");

  const Topic& topic = topic_of(s->session);
  PostMessageResult result;
  result.toxic = screen_input(input, lexicon_) == InputVerdict::Toxic;
  TurnSignals signals;
  signals.termination = detect_termination_intent(input, termination_);
  signals.off_topic = !result.toxic && !signals.termination &&
                      off_topic_.is_off_topic(input, topic, config_.off_topic_threshold);
  result.off_topic = signals.off_topic;

  auto reply = generate(*s, topic, input, signals, result.toxic, result);
  result.served_from = *reply.served_from;
  result.message = advance_session(s->session, input, std::move(reply), signals, config_.budget);
  result.state = s->session.state;
  result.turn_index = s->session.turns.size() - 1;
  if (s->log) s->log->append(turn_record(s->session, signals).dump());
  return result;
}

double ChatService::submit_feedback(const std::string& session_id, std::size_t turn_index, Feedback signal) {
  auto s = slot(session_id);
  std::unique_lock lock(s->mu, std::try_to_lock);
  if (!lock.owns_lock()) throw ServiceError(ServiceErrorCode::Busy, "session is handling another message");
  auto& turns = s->session.turns;
  if (turn_index >= turns.size() || turns[turn_index].speaker != Speaker::Bot) {
    throw ServiceError(ServiceErrorCode::UnknownTurn, "no bot turn at index " + std::to_string(turn_index));
  }
  Turn& turn = turns[turn_index];
  turn.feedback = signal;
  std::optional<CacheKey> key;
  if (turn.cache_ref) key = CacheKey{turn.cache_ref->normalized_query, turn.cache_ref->context};
  const double threshold = cache_->apply_feedback(key, signal, turn.served_from.value_or(ServedFrom::Backend));
  if (s->log) {
    s->log->append(json{{"op", "feedback"}, {"turn", turn_index}, {"signal", to_string(signal)}}.dump());
  }
  return threshold;
}

std::string ChatService::export_transcript(const std::string& session_id) const {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return ::buddy::export_transcript(s->session, topic_of(s->session));
}

Session ChatService::get_session(const std::string& session_id) const {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return s->session;
}

SessionSummary ChatService::summarize(const std::string& session_id) const {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return summary_of(s->session);
}

const std::vector<Topic>& ChatService::list_topics() const { return topics_.topics(); }

ServiceMetrics ChatService::metrics() const {
  ServiceMetrics m;
  m.cache = cache_->metrics();
  {
    std::shared_lock lock(sessions_mu_);
    m.sessions = sessions_.size();
  }
  m.fallbacks = fallbacks_.load();
  return m;
}

}  // namespace buddy
