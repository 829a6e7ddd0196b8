#include "buddy/cache/semantic_cache.hpp"

#include <algorithm>
#include <mutex>

#include "buddy/common/text.hpp"

namespace buddy {
namespace {

using nlohmann::json;

constexpr AppendLog::Magic kCacheMagic = {'B', 'D', 'Y', 'C'};
constexpr std::uint8_t kCacheLogVersion = 1;

json key_json(const CacheKey& k) { return json{{"q", k.normalized_query}, {"ctx", k.context}}; }

CacheKey key_from(const json& j) { return CacheKey{j.at("q").get<std::string>(), j.at("ctx").get<std::uint64_t>()}; }

}  // namespace

std::size_t CacheKeyHash::operator()(const CacheKey& k) const {
  return static_cast<std::size_t>(text::fnv1a64(k.normalized_query) ^ (k.context * 0x9E3779B97F4A7C15ULL));
}

std::uint64_t context_fingerprint(std::string_view topic_id, TemplateVersion version,
                                  std::string_view last_bot_utterance) {
  std::string material;
  material.append(topic_id);
  material.push_back('\x1f');
  material.append(to_string(version));
  material.push_back('\x1f');
  material.append(last_bot_utterance);
  return text::fnv1a64(material);
}

CacheKey make_cache_key(std::string_view user_input, std::uint64_t context) {
  return CacheKey{text::normalize(user_input), context};
}

void ThresholdController::validate() const {
  if (!(0.0 <= floor && floor <= threshold && threshold <= ceiling && ceiling <= 1.0)) {
    throw ConfigError("cache threshold must satisfy 0 <= floor <= threshold <= ceiling <= 1");
  }
  if (!(step > 0.0)) throw ConfigError("cache threshold step must be positive");
}

ThresholdController adapt_threshold(ThresholdController ctrl, ThresholdEvent event) {
  if (event == ThresholdEvent::NegativeFeedbackOnSimilar) {
    ctrl.threshold = std::min(ctrl.ceiling, ctrl.threshold + ctrl.step);
  } else {
    ctrl.threshold = std::max(ctrl.floor, ctrl.threshold - ctrl.step);
  }
  return ctrl;
}

std::optional<ThresholdEvent> threshold_event(Feedback signal, ServedFrom served_from) {
  if (served_from != ServedFrom::Similar) return std::nullopt;
  return signal == Feedback::Negative ? ThresholdEvent::NegativeFeedbackOnSimilar
                                      : ThresholdEvent::PositiveFeedbackOnSimilar;
}

ResolveError::ResolveError(std::optional<BackendError> backend, std::optional<MessageError> message,
                           bool end_marker, std::string raw)
    : Error(backend ? "backend failed: " + std::string(to_string(backend->kind)) + " " + backend->message
                    : "unusable completion: " +
                          (message ? std::string(to_string(message->kind)) + " " + message->detail : "")),
      backend_(std::move(backend)),
      message_(std::move(message)),
      end_marker_(end_marker),
      raw_(std::move(raw)) {}

SemanticCache::SemanticCache(CacheConfig config, std::shared_ptr<const Embedder> embedder)
    : config_(std::move(config)), embedder_(std::move(embedder)), controller_(config_.controller) {
  if (!embedder_) throw std::invalid_argument("cache needs an embedder");
  if (config_.capacity == 0) throw ConfigError("cache capacity must be positive");
  controller_.validate();
  if (!config_.log_path.empty()) {
    log_ = std::make_unique<AppendLog>(config_.log_path, kCacheMagic, kCacheLogVersion);
    replay();
  }
}

void SemanticCache::replay() {
  std::unique_lock lock(mu_);
  for (const auto& payload : log_->replayed()) {
    const auto rec = json::parse(payload, nullptr, false);
    if (rec.is_discarded() || !rec.contains("op")) throw ConfigError("corrupt cache log record");
    const auto op = rec.at("op").get<std::string>();
    if (op == "insert") {
      CacheEntry e;
      e.key = key_from(rec);
      e.embedding.values = rec.at("emb").get<std::vector<float>>();
      if (e.embedding.values.size() != embedder_->dimension()) e.embedding = embedder_->embed(e.key.normalized_query);
      e.response = rec.at("response").get<BotMessage>();
      e.hit_count = rec.value("hits", std::uint64_t{0});
      e.feedback = rec.value("feedback", std::int64_t{0});
      insert_locked(std::move(e), false);
    } else if (op == "hit") {
      if (auto it = index_.find(key_from(rec)); it != index_.end()) touch_locked(it->second, false);
    } else if (op == "feedback") {
      if (auto it = index_.find(key_from(rec)); it != index_.end()) {
        it->second->feedback += rec.at("delta").get<std::int64_t>();
      }
    } else if (op == "threshold") {
      controller_.threshold = std::clamp(rec.at("value").get<double>(), controller_.floor, controller_.ceiling);
    }
  }
}

void SemanticCache::insert_locked(CacheEntry entry, bool log) {
  if (log && log_) {
    auto rec = key_json(entry.key);
    rec["op"] = "insert";
    rec["emb"] = entry.embedding.values;
    rec["response"] = entry.response;
    rec["hits"] = entry.hit_count;
    rec["feedback"] = entry.feedback;
    log_->append(rec.dump());
  }
  if (auto it = index_.find(entry.key); it != index_.end()) {
    entries_.erase(it->second);
    index_.erase(it);
  }
  entries_.push_front(std::move(entry));
  index_[entries_.front().key] = entries_.begin();
  while (entries_.size() > config_.capacity) {
    index_.erase(entries_.back().key);
    entries_.pop_back();
  }
}

void SemanticCache::touch_locked(EntryList::iterator it, bool log) {
  ++it->hit_count;
  entries_.splice(entries_.begin(), entries_, it);
  if (log && log_) {
    auto rec = key_json(it->key);
    rec["op"] = "hit";
    log_->append(rec.dump());
  }
}

ResolveResult SemanticCache::resolve(const CacheKey& key, std::string_view prompt, CompletionClient& backend,
                                     const ResponseFilter& accept) {
  {
    std::unique_lock lock(mu_);
    if (auto it = index_.find(key); it != index_.end()) {
      touch_locked(it->second, true);
      ++exact_hits_;
      ResolveResult r;
      r.message = it->second->response;
      r.served_from = ServedFrom::Cache;
      r.served_key = key;
      r.raw = json(r.message).dump();
      return r;
    }
  }

  const auto query_embedding = embedder_->embed(key.normalized_query);
  std::optional<CacheKey> best_key;
  double best = -1.0;
  double threshold = 0.0;
  {
    std::shared_lock lock(mu_);
    threshold = controller_.threshold;
    for (const auto& e : entries_) {
      if (e.key.context != key.context) continue;
      const double sim = cosine(query_embedding, e.embedding);
      if (sim > best) {
        best = sim;
        best_key = e.key;
      }
    }
  }

  if (best_key && best >= threshold) {
    // Re-check the exact store for the neighbour; it may have been evicted.
    std::unique_lock lock(mu_);
    if (auto it = index_.find(*best_key); it != index_.end()) {
      touch_locked(it->second, true);
      ++similar_hits_;
      ResolveResult r;
      r.message = it->second->response;
      r.served_from = ServedFrom::Similar;
      r.served_key = *best_key;
      r.similarity = best;
      r.raw = json(r.message).dump();
      return r;
    }
  }
  return call_backend(key, prompt, backend, accept);
}

ResolveResult SemanticCache::regenerate(const CacheKey& key, std::string_view prompt, CompletionClient& backend,
                                        const ResponseFilter& accept) {
  return call_backend(key, prompt, backend, accept);
}

ResolveResult SemanticCache::call_backend(const CacheKey& key, std::string_view prompt, CompletionClient& backend,
                                          const ResponseFilter& accept) {
  ++backend_calls_;
  auto completion = backend.complete(prompt);
  if (!completion.ok()) throw ResolveError(completion.error, std::nullopt, false, "");

  auto parsed = parse_bot_message(completion.raw_text);
  if (!parsed.ok()) {
    ++error_events_;
    throw ResolveError(std::nullopt, parsed.error, parsed.end_marker, completion.raw_text);
  }

  ResolveResult r;
  r.message = std::move(*parsed.message);
  r.served_from = ServedFrom::Backend;
  r.served_key = key;
  r.raw = std::move(completion.raw_text);
  if (!accept || accept(r.message)) {
    CacheEntry entry;
    entry.key = key;
    entry.embedding = embedder_->embed(key.normalized_query);
    entry.response = r.message;
    std::unique_lock lock(mu_);
    insert_locked(std::move(entry), true);
    r.stored = true;
  }
  return r;
}

std::optional<CacheEntry> SemanticCache::find(const CacheKey& key) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return *it->second;
}

double SemanticCache::apply_feedback(const std::optional<CacheKey>& key, Feedback signal, ServedFrom served_from) {
  std::unique_lock lock(mu_);
  if (key) {
    if (auto it = index_.find(*key); it != index_.end()) {
      const std::int64_t delta = signal == Feedback::Positive ? 1 : -1;
      it->second->feedback += delta;
      if (log_) {
        auto rec = key_json(*key);
        rec["op"] = "feedback";
        rec["delta"] = delta;
        log_->append(rec.dump());
      }
    }
  }
  if (auto event = threshold_event(signal, served_from)) {
    controller_ = adapt_threshold(controller_, *event);
    if (log_) log_->append(json{{"op", "threshold"}, {"value", controller_.threshold}}.dump());
  }
  return controller_.threshold;
}

void SemanticCache::record_error_event() { ++error_events_; }

ThresholdController SemanticCache::controller() const {
  std::shared_lock lock(mu_);
  return controller_;
}

CacheMetrics SemanticCache::metrics() const {
  std::shared_lock lock(mu_);
  CacheMetrics m;
  m.exact_hits = exact_hits_.load();
  m.similar_hits = similar_hits_.load();
  m.backend_calls = backend_calls_.load();
  m.error_events = error_events_.load();
  m.threshold = controller_.threshold;
  m.entries = entries_.size();
  return m;
}

std::size_t SemanticCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

}  // namespace buddy
