#include "sketchplay/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <iostream>

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  namespace service = sketchplay::service;
  service::Options options;
  std::string host;
  int port = 0;
  try {
    service::options_from_environment(options, &host, &port);
  } catch (const sketchplay::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"HTTP session service for the sketch studio"};
  app.add_option("--host", host, "Bind host (default from SKETCHPLAY_ADDR)");
  app.add_option("--port", port, "Bind port (default from SKETCHPLAY_ADDR)");
  app.add_option("--data-dir", options.data_dir, "Session storage (default from SKETCHPLAY_DATA_DIR)");
  std::string table;
  app.add_option("--material-table", table, "Material table JSON")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);
  if (!table.empty()) options.material_table_path = table;

  try {
    service::Service svc(options);
    httplib::Server server;
    svc.mount(server);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    if (!server.bind_to_port(host, port)) {
      std::cerr << "error: cannot bind " << host << ":" << port << "\n";
      return 2;
    }
    std::cerr << "listening on " << host << ":" << port << ", data in " << options.data_dir << "\n";
    server.listen_after_bind();
    g_server = nullptr;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
