#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "buddy/backend/backend.hpp"
#include "buddy/cache/embedding.hpp"
#include "buddy/common/append_log.hpp"
#include "buddy/common/error.hpp"
#include "buddy/conversation/message.hpp"
#include "buddy/conversation/types.hpp"

namespace buddy {

struct CacheKey {
  std::string normalized_query;
  std::uint64_t context = 0;

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const;
};

/// Stable hash of (topic id, template version, last bot utterance).
std::uint64_t context_fingerprint(std::string_view topic_id, TemplateVersion version,
                                  std::string_view last_bot_utterance);

CacheKey make_cache_key(std::string_view user_input, std::uint64_t context);

struct ThresholdController {
  double threshold = 0.85;
  double floor = 0.75;
  double ceiling = 0.98;
  double step = 0.01;

  /// Throws ConfigError unless 0 <= floor <= threshold <= ceiling <= 1, step > 0.
  void validate() const;
};

enum class ThresholdEvent { NegativeFeedbackOnSimilar, PositiveFeedbackOnSimilar };

/// Negative raises the threshold by one step (clamped at ceiling), positive
/// lowers it (clamped at floor).
ThresholdController adapt_threshold(ThresholdController ctrl, ThresholdEvent event);

/// Only feedback on Similar-served responses moves the threshold.
std::optional<ThresholdEvent> threshold_event(Feedback signal, ServedFrom served_from);

struct CacheEntry {
  CacheKey key;
  Embedding embedding;
  BotMessage response;
  std::uint64_t hit_count = 0;
  std::int64_t feedback = 0;
};

struct CacheConfig {
  std::size_t capacity = 10000;
  ThresholdController controller;
  /// Empty: in-memory only.
  std::filesystem::path log_path;
};

struct CacheMetrics {
  std::uint64_t exact_hits = 0;
  std::uint64_t similar_hits = 0;
  std::uint64_t backend_calls = 0;
  std::uint64_t error_events = 0;
  double threshold = 0.0;
  std::size_t entries = 0;
};

struct ResolveResult {
  BotMessage message;
  ServedFrom served_from = ServedFrom::Backend;
  /// Key of the entry that served the response (the neighbour on Similar).
  CacheKey served_key;
  double similarity = 1.0;
  std::string raw;  // backend completion text, or the cached message as JSON
  bool stored = false;
};

/// Path-3 failure: the backend failed (nothing cached) or its completion did
/// not parse (counted as one error event).
class ResolveError : public Error {
 public:
  ResolveError(std::optional<BackendError> backend, std::optional<MessageError> message, bool end_marker,
               std::string raw);

  const std::optional<BackendError>& backend_error() const { return backend_; }
  const std::optional<MessageError>& message_error() const { return message_; }
  bool end_marker() const { return end_marker_; }
  const std::string& raw() const { return raw_; }

 private:
  std::optional<BackendError> backend_;
  std::optional<MessageError> message_;
  bool end_marker_;
  std::string raw_;
};

/// Decides whether a freshly generated response may be cached.
using ResponseFilter = std::function<bool(const BotMessage&)>;

/// Exact store + vector index + backend fallback. Reads run concurrently;
/// every mutation goes through one writer lock and, when configured, the
/// append-only entry log.
class SemanticCache {
 public:
  SemanticCache(CacheConfig config, std::shared_ptr<const Embedder> embedder);

  /// 1. exact hit -> Cache; 2. best cosine among entries with the same context
  /// >= threshold -> re-fetch that entry, Similar; 3. backend, parse, insert
  /// (when `accept` allows), Backend. Throws ResolveError on path-3 failure.
  ResolveResult resolve(const CacheKey& key, std::string_view prompt, CompletionClient& backend,
                        const ResponseFilter& accept = {});

  /// Skips paths 1-2: always asks the backend and replaces the entry under
  /// `key` when the response is accepted.
  ResolveResult regenerate(const CacheKey& key, std::string_view prompt, CompletionClient& backend,
                           const ResponseFilter& accept = {});

  std::optional<CacheEntry> find(const CacheKey& key) const;

  /// Tallies feedback on the entry (if still cached) and adapts the threshold
  /// when the response was Similar-served. Returns the new threshold.
  double apply_feedback(const std::optional<CacheKey>& key, Feedback signal, ServedFrom served_from);

  void record_error_event();

  ThresholdController controller() const;
  CacheMetrics metrics() const;
  std::size_t size() const;
  const Embedder& embedder() const { return *embedder_; }

 private:
  using EntryList = std::list<CacheEntry>;

  ResolveResult call_backend(const CacheKey& key, std::string_view prompt, CompletionClient& backend,
                             const ResponseFilter& accept);
  // The following require mu_ held exclusively.
  void insert_locked(CacheEntry entry, bool log);
  void touch_locked(EntryList::iterator it, bool log);
  void replay();

  CacheConfig config_;
  std::shared_ptr<const Embedder> embedder_;
  mutable std::shared_mutex mu_;
  EntryList entries_;  // most recently used first
  std::unordered_map<CacheKey, EntryList::iterator, CacheKeyHash> index_;
  ThresholdController controller_;
  std::unique_ptr<AppendLog> log_;
  std::atomic<std::uint64_t> exact_hits_{0};
  std::atomic<std::uint64_t> similar_hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> error_events_{0};
};

}  // namespace buddy
