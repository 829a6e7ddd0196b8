#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include "buddy/backend/backend.hpp"
#include "buddy/cache/semantic_cache.hpp"
#include "buddy/common/append_log.hpp"
#include "buddy/common/error.hpp"
#include "buddy/conversation/policy.hpp"
#include "buddy/conversation/prompt.hpp"
#include "buddy/conversation/session.hpp"
#include "buddy/conversation/topic.hpp"
#include "buddy/guardrails/guardrails.hpp"
#include "buddy/service/config.hpp"

namespace buddy {

enum class ServiceErrorCode { BadRequest, UnknownTopic, UnknownSession, UnknownTurn, SessionClosed, Busy, BackendError };

std::string_view to_string(ServiceErrorCode code);
int http_status(ServiceErrorCode code);

class ServiceError : public Error {
 public:
  ServiceError(ServiceErrorCode code, const std::string& message) : Error(message), code_(code) {}
  ServiceErrorCode code() const { return code_; }

 private:
  ServiceErrorCode code_;
};

struct SessionSummary {
  std::string id;
  std::string topic_id;
  std::string persona;
  TemplateVersion template_version = TemplateVersion::V1;
  SessionState state = SessionState::Open;
  int user_turns = 0;
  int off_topic_count = 0;
  std::size_t turn_count = 0;
};

struct CreateSessionResult {
  SessionSummary session;
  BotMessage message;
};

struct PostMessageResult {
  BotMessage message;
  ServedFrom served_from = ServedFrom::Backend;
  SessionState state = SessionState::Open;
  /// Index of the stored bot turn; use it for feedback.
  std::size_t turn_index = 0;
  bool off_topic = false;
  bool toxic = false;
  /// The topic fallback line was served after two rejected generations.
  bool fallback = false;
};

struct ServiceMetrics {
  CacheMetrics cache;
  std::size_t sessions = 0;
  std::uint64_t fallbacks = 0;
};

/// Called with (session id, rendered prompt) before each backend round.
using PromptObserver = std::function<void(const std::string&, const std::string&)>;

/// The request path: guardrails, policy, prompt rendering, semantic cache,
/// backend, turn budget. Sessions run in parallel; requests for one session
/// are serialized, and an overlapping request gets Busy.
class ChatService {
 public:
  /// `backend` overrides the client built from config.backend.
  explicit ChatService(ServiceConfig config, std::shared_ptr<CompletionClient> backend = nullptr);
  ~ChatService();

  CreateSessionResult create_session(const std::string& topic_id, std::optional<std::string> persona = {},
                                     std::optional<TemplateVersion> version = {});
  PostMessageResult post_message(const std::string& session_id, const std::string& user_text);
  /// Returns the cache threshold after the feedback was applied.
  double submit_feedback(const std::string& session_id, std::size_t turn_index, Feedback signal);
  std::string export_transcript(const std::string& session_id) const;
  Session get_session(const std::string& session_id) const;
  SessionSummary summarize(const std::string& session_id) const;
  const std::vector<Topic>& list_topics() const;
  ServiceMetrics metrics() const;

  void set_prompt_observer(PromptObserver observer);
  const ServiceConfig& config() const { return config_; }

 private:
  struct Slot;

  std::shared_ptr<Slot> slot(const std::string& session_id) const;
  const Topic& topic_of(const Session& s) const;
  BotReply generate(Slot& slot, const Topic& topic, const std::string& user_text, const TurnSignals& signals,
                    bool toxic, PostMessageResult& result);
  void notify(const std::string& session_id, const std::string& prompt);
  void replay_sessions();
  std::string new_session_id();

  ServiceConfig config_;
  TopicCatalog topics_;
  TemplateStore templates_;
  Lexicon lexicon_;
  TerminationLexicon termination_;
  std::shared_ptr<const Embedder> embedder_;
  std::unique_ptr<SemanticCache> cache_;
  OffTopicDetector off_topic_;
  std::shared_ptr<CompletionClient> backend_;

  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;

  std::mutex observer_mu_;
  PromptObserver observer_;
  std::mutex id_mu_;
  std::mt19937_64 id_rng_;
  std::atomic<std::uint64_t> fallbacks_{0};
};

}  // namespace buddy
