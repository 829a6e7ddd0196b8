#include "buddy/service/http_gateway.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace buddy {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, ServiceErrorCode code, const std::string& message) {
  send_json(res, http_status(code), json{{"error", {{"code", to_string(code)}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw ServiceError(ServiceErrorCode::BadRequest, "request body must be a JSON object");
  }
  return body;
}

template <typename T>
T field(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end()) throw ServiceError(ServiceErrorCode::BadRequest, std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ServiceError(ServiceErrorCode::BadRequest, std::string("field '") + name + "' has the wrong type");
  }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_json(res, 500, json{{"error", {{"code", "Internal"}, {"message", "internal error"}}}});
    }
  };
}

}  // namespace

json to_json(const SessionSummary& s) {
  return json{{"id", s.id},
              {"topic_id", s.topic_id},
              {"persona", s.persona},
              {"template_version", to_string(s.template_version)},
              {"state", to_string(s.state)},
              {"user_turns", s.user_turns},
              {"off_topic_count", s.off_topic_count},
              {"turn_count", s.turn_count}};
}

json to_json(const PostMessageResult& r) {
  return json{{"message", r.message},
              {"served_from", to_string(r.served_from)},
              {"state", to_string(r.state)},
              {"turn_index", r.turn_index},
              {"off_topic", r.off_topic},
              {"toxic", r.toxic},
              {"fallback", r.fallback}};
}

json to_json(const ServiceMetrics& m) {
  return json{{"cache",
               {{"exact_hits", m.cache.exact_hits},
                {"similar_hits", m.cache.similar_hits},
                {"backend_calls", m.cache.backend_calls},
                {"error_events", m.cache.error_events},
                {"threshold", m.cache.threshold},
                {"entries", m.cache.entries}}},
              {"sessions", m.sessions},
              {"fallbacks", m.fallbacks}};
}

json topic_to_json(const Topic& t) {
  return json{{"id", t.id},
              {"title", t.title},
              {"objective", t.objective},
              {"key_expressions", t.key_expressions},
              {"opening_line", t.opening_line}};
}

HttpGateway::HttpGateway(ChatService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpGateway::~HttpGateway() { stop(); }

void HttpGateway::install_routes() {
  auto& svc = service_;
  auto& srv = *server_;

  srv.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, json{{"status", "ok"}});
          }));

  srv.Get("/v1/topics", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            json topics = json::array();
            for (const auto& t : svc.list_topics()) topics.push_back(topic_to_json(t));
            send_json(res, 200, json{{"topics", topics}});
          }));

  srv.Post("/v1/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             std::optional<std::string> persona;
             std::optional<TemplateVersion> version;
             if (body.contains("persona")) persona = field<std::string>(body, "persona");
             if (body.contains("template_version")) {
               version = parse_template_version(field<std::string>(body, "template_version"));
               if (!version) throw ServiceError(ServiceErrorCode::BadRequest, "unknown template_version");
             }
             const auto created = svc.create_session(field<std::string>(body, "topic_id"), persona, version);
             send_json(res, 201, json{{"session", to_json(created.session)}, {"message", created.message}});
           }));

  srv.Get(R"(/v1/sessions/([0-9a-f]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, json{{"session", to_json(svc.summarize(req.matches[1]))}});
          }));

  srv.Post(R"(/v1/sessions/([0-9a-f]+)/messages)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             send_json(res, 200, to_json(svc.post_message(req.matches[1], field<std::string>(body, "text"))));
           }));

  srv.Post(R"(/v1/sessions/([0-9a-f]+)/feedback)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             const auto signal = parse_feedback(field<std::string>(body, "signal"));
             if (!signal) throw ServiceError(ServiceErrorCode::BadRequest, "signal must be positive or negative");
             const auto turn = field<std::int64_t>(body, "turn_index");
             if (turn < 0) throw ServiceError(ServiceErrorCode::UnknownTurn, "no bot turn at a negative index");
             const double threshold = svc.submit_feedback(req.matches[1], static_cast<std::size_t>(turn), *signal);
             send_json(res, 200, json{{"acknowledged", true}, {"threshold", threshold}});
           }));

  srv.Get(R"(/v1/sessions/([0-9a-f]+)/transcript)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            res.status = 200;
            res.set_content(svc.export_transcript(req.matches[1]), "text/plain; charset=utf-8");
          }));

  srv.Get("/v1/metrics", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, to_json(svc.metrics()));
          }));
}

bool HttpGateway::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpGateway::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpGateway::serve() { return server_->listen_after_bind(); }

void HttpGateway::stop() {
  if (server_) server_->stop();
}

}  // namespace buddy
