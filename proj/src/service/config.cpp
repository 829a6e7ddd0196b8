#include "buddy/service/config.hpp"

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"

namespace buddy {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_readable(const std::filesystem::path& p, std::string_view what, bool directory) {
  std::error_code ec;
  const bool ok = directory ? std::filesystem::is_directory(p, ec) : std::filesystem::is_regular_file(p, ec);
  if (!ok) throw ConfigError(std::string(what) + " '" + p.string() + "' is not readable");
}

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port out of range");
  require_readable(topics_path, "topic catalog", false);
  require_readable(templates_dir, "template dir", true);
  require_readable(lexicon_path, "lexicon", false);
  if (!scripts_dir.empty()) require_readable(scripts_dir, "scripts dir", true);
  if (embedding_dimension == 0) throw ConfigError("embedding dimension must be positive");
  cache_threshold.validate();
  if (cache_capacity == 0) throw ConfigError("cache capacity must be positive");
  if (!(off_topic_threshold >= 0.0 && off_topic_threshold <= 1.0)) {
    throw ConfigError("off_topic_threshold must lie in [0, 1]");
  }
  if (max_word_length == 0) throw ConfigError("max_word_length must be positive");
  if (budget.soft_close_at < 1 || budget.hard_close_at < budget.soft_close_at) {
    throw ConfigError("turn budget needs 1 <= soft_close_at <= hard_close_at");
  }
  backend.validate();
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  auto doc = nlohmann::json::parse(text::read_file(path.string()), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("config " + path.string() + " is not a JSON object");
  try {
    return from_json(doc, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

ServiceConfig ServiceConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.topics_path = resolve(base_dir, j.at("topics").get<std::string>());
  c.templates_dir = resolve(base_dir, j.at("templates").get<std::string>());
  c.lexicon_path = resolve(base_dir, j.at("lexicon").get<std::string>());
  c.scripts_dir = resolve(base_dir, j.value("scripts", std::string{}));
  c.persistence_dir = resolve(base_dir, j.value("persistence_dir", std::string{}));
  if (j.contains("default_template")) {
    auto v = parse_template_version(j.at("default_template").get<std::string>());
    if (!v) throw ConfigError("unknown default_template");
    c.default_template = *v;
  }
  if (j.contains("cache")) {
    const auto& cache = j.at("cache");
    c.embedding_dimension = cache.value("dimension", c.embedding_dimension);
    c.cache_threshold.threshold = cache.value("threshold", c.cache_threshold.threshold);
    c.cache_threshold.floor = cache.value("floor", c.cache_threshold.floor);
    c.cache_threshold.ceiling = cache.value("ceiling", c.cache_threshold.ceiling);
    c.cache_threshold.step = cache.value("step", c.cache_threshold.step);
    c.cache_capacity = cache.value("capacity", c.cache_capacity);
  }
  c.off_topic_threshold = j.value("off_topic_threshold", c.off_topic_threshold);
  c.max_word_length = j.value("max_word_length", c.max_word_length);
  if (j.contains("turn_budget")) {
    c.budget.soft_close_at = j.at("turn_budget").value("soft_close_at", c.budget.soft_close_at);
    c.budget.hard_close_at = j.at("turn_budget").value("hard_close_at", c.budget.hard_close_at);
  }
  c.backend = j.at("backend").get<BackendSpec>();
  c.validate();
  return c;
}

ServiceConfig ServiceConfig::with_shipped_data(const std::filesystem::path& data_dir) {
  ServiceConfig c;
  c.topics_path = data_dir / "topics.json";
  c.templates_dir = data_dir / "templates";
  c.lexicon_path = data_dir / "lexicon.txt";
  c.scripts_dir = data_dir / "scripts";
  c.backend.name = "mock-buddy";
  c.backend.endpoint = "mock:buddy";
  return c;
}

}  // namespace buddy
