#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "buddy/common/text.hpp"
#include "buddy/service/chat_service.hpp"
#include "buddy/service/http_gateway.hpp"

namespace {
buddy::HttpGateway* g_gateway = nullptr;

void on_signal(int) {
  if (g_gateway) g_gateway->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Buddy conversation service"};
  std::string config_path;
  int port = -1;
  std::string mock_script;
  std::string log_level = "info";
  app.add_option("--config", config_path, "Service config JSON (default: shipped data with the mock backend)");
  app.add_option("--port", port, "Listen port, overrides the config")->check(CLI::Range(0, 65535));
  app.add_option("--mock-backend", mock_script, "Serve completions from this script file instead of the backend");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::from_str(log_level));
  try {
    auto config = config_path.empty() ? buddy::ServiceConfig::with_shipped_data(BUDDY_DATA_DIR)
                                      : buddy::ServiceConfig::load(config_path);
    if (port >= 0) config.port = port;

    std::shared_ptr<buddy::CompletionClient> backend;
    if (!mock_script.empty()) {
      buddy::BackendSpec spec{"mock-script", "mock:" + mock_script};
      backend = std::make_shared<buddy::ScriptedCompletionClient>(
          spec, buddy::ScriptLibrary::parse_script(buddy::text::read_file(mock_script)));
    }
    buddy::ChatService service(config, backend);
    buddy::HttpGateway gateway(service);
    g_gateway = &gateway;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    spdlog::info("listening on {}:{}", config.host, config.port);
    if (!gateway.listen(config.host, config.port)) {
      spdlog::error("cannot bind {}:{}", config.host, config.port);
      return 1;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
