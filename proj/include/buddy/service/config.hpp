#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "buddy/backend/backend.hpp"
#include "buddy/cache/semantic_cache.hpp"
#include "buddy/conversation/session.hpp"
#include "buddy/conversation/types.hpp"

namespace buddy {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path topics_path;
  std::filesystem::path templates_dir;
  TemplateVersion default_template = TemplateVersion::V1;
  std::filesystem::path lexicon_path;
  /// Mock response scripts for `mock:` backends; may be empty.
  std::filesystem::path scripts_dir;
  /// Empty: nothing is persisted.
  std::filesystem::path persistence_dir;

  std::size_t embedding_dimension = 256;
  ThresholdController cache_threshold;
  std::size_t cache_capacity = 10000;

  double off_topic_threshold = 0.3;
  std::size_t max_word_length = 12;
  TurnBudget budget;

  BackendSpec backend;

  /// Throws ConfigError on values outside their type invariants.
  void validate() const;

  /// Relative paths are resolved against the config file's directory.
  static ServiceConfig load(const std::filesystem::path& path);
  static ServiceConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// The shipped data directory with an in-process mock backend.
  static ServiceConfig with_shipped_data(const std::filesystem::path& data_dir);
};

}  // namespace buddy
