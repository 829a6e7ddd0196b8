#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "buddy/service/chat_service.hpp"

namespace httplib {
class Server;
}

namespace buddy {

nlohmann::json to_json(const SessionSummary& s);
nlohmann::json to_json(const PostMessageResult& r);
nlohmann::json to_json(const ServiceMetrics& m);
nlohmann::json topic_to_json(const Topic& t);

/// The /v1 HTTP API over a ChatService. See docs/http-api.md.
class HttpGateway {
 public:
  explicit HttpGateway(ChatService& service);
  ~HttpGateway();

  /// Binds and serves until stop(); returns false when binding fails.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port; returns it, or -1.
  int bind_any(const std::string& host);
  /// Serves on a port obtained from bind_any.
  bool serve();
  void stop();

 private:
  void install_routes();

  ChatService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace buddy
