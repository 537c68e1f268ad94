// safex-server: HTTP+JSON session service with a server-sent event stream.

#include "safex/http_service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

namespace {
safex::HttpService* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safex-server: session service"};
  std::string host = "127.0.0.1";
  int port = 8080;
  app.add_option("--host", host);
  app.add_option("--port", port, "0 picks a free port");
  CLI11_PARSE(app, argc, argv);

  safex::HttpService service;
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  if (port == 0) port = service.bind_any_port(host);
  else if (!service.server().bind_to_port(host, port)) port = -1;
  if (port < 0) {
    std::cerr << "error: cannot bind " << host << "\n";
    return 2;
  }
  std::cout << "listening on http://" << host << ":" << port << std::endl;
  return service.listen_after_bind() ? 0 : 2;
}
