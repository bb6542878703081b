#pragma once

#include "sketchplay/pipeline.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

// Session store behind the studio's HTTP API. Each session lives in its own
// directory under `data_dir/sessions/<id>` so a restarted server picks up
// where it left off.
//
// Status machine: editing -> simulating -> done | failed. Any edit in done or
// failed returns the session to editing; edits while simulating are
// rejected with BadStatus.
namespace sketchplay::service {

enum class Status { Editing, Simulating, Done, Failed };
std::string_view to_string(Status s);

struct Options {
  std::string data_dir = "sketchplay-data";
  pipeline::Settings defaults;
  std::optional<std::string> material_table_path;
  recognition::EndpointConfig endpoint;  // empty url: rule-based only
};

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class Service {
 public:
  explicit Service(Options options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Routes one request. Never throws; library errors become
  // {"error": code, "detail": text} with a matching status.
  Response handle(const Request& request);

  // Blocks until no background run is in flight.
  void wait_idle();

  // Registers `handle` on every path of an httplib server.
  void mount(httplib::Server& server);

 private:
  struct Session;

  Response dispatch(const Request& request);
  Response create_session(const std::string& body);
  Response list_sessions();
  Response describe(Session& s);
  Response submit_stroke(Session& s, const std::string& body);
  Response bind_gesture(Session& s, const std::string& object_id, const std::string& body);
  Response simulate(const std::shared_ptr<Session>& s, const std::string& body);
  Response get_frames(Session& s, const std::map<std::string, std::string>& query);
  Response export_artifact(Session& s, const std::map<std::string, std::string>& query);

  std::shared_ptr<Session> find(const std::string& id);
  void load_existing();
  void persist(const Session& s) const;
  pipeline::Inputs inputs_of(const Session& s) const;
  void finish_run(Session& s, pipeline::Artifacts artifacts);
  std::string session_dir(const std::string& id) const;
  std::string new_id();

  Options options_;
  recognition::MaterialTable table_;
  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex jobs_mutex_;
  std::vector<std::thread> jobs_;
};

// Reads SKETCHPLAY_ADDR ("host:port", default 127.0.0.1:8080) and
// SKETCHPLAY_DATA_DIR into `options` and the returned host/port.
void options_from_environment(Options& options, std::string* host, int* port);

}  // namespace sketchplay::service
