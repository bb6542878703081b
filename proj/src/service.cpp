#include "sketchplay/service.hpp"

#include "sketchplay/emitter/emitter.hpp"
#include "sketchplay/physics/frame_log.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace sketchplay::service {

namespace fs = std::filesystem;
using nlohmann::json;

struct Service::Session {
  std::mutex mutex;
  std::string id;
  Status status = Status::Editing;
  int revision = 0;
  int runs = 0;
  std::string error;
  sketch::SketchCanvas canvas;
  std::vector<pipeline::GestureBinding> gestures;
  pipeline::Settings settings;
  std::optional<physics::FrameLog> frames;  // cached decode of frames.spf
  std::vector<std::string> body_ids;        // frame log body order
};

namespace {

constexpr double kDefaultExtent = 2.0;  // meters, both axes

Response json_response(int status, const json& body) { return {status, "application/json", body.dump() + "\n"}; }

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownObject:
    case ErrorCode::UnknownBody: return 404;
    case ErrorCode::BadStatus: return 409;
    case ErrorCode::RangeOutOfBounds: return 416;
    case ErrorCode::NumericalBlowup: return 422;
    case ErrorCode::RemoteUnavailable: return 502;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

Response error_response(const Error& e) {
  return json_response(http_status(e.code()), json{{"error", std::string(to_string(e.code()))}, {"detail", e.detail()}});
}

Response error_response(int status, const std::string& code, const std::string& detail) {
  return json_response(status, json{{"error", code}, {"detail", detail}});
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedRecord, "request body must be a JSON object");
  return j;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

Status status_from_string(const std::string& s) {
  if (s == "editing") return Status::Editing;
  if (s == "simulating") return Status::Simulating;
  if (s == "done") return Status::Done;
  if (s == "failed") return Status::Failed;
  throw Error(ErrorCode::MalformedRecord, "unknown session status " + s);
}

// Accepts {"points": [{t,x,y}...]} or {"frames": [{t, points: [[x,y,z] x 21]}], "keypoint"?}.
trajectory::Stroke stroke_from_payload(const json& j) {
  if (j.contains("points")) return pipeline::parse_stroke_points(j["points"].dump());
  if (!j.contains("frames") || !j["frames"].is_array()) {
    throw Error(ErrorCode::MalformedStroke, "expected \"points\" or \"frames\"");
  }
  std::string lines;
  for (const auto& f : j["frames"]) lines += f.dump() + "\n";
  std::size_t keypoint = trajectory::kDefaultKeypoint;
  if (j.contains("keypoint")) {
    if (!j["keypoint"].is_number_unsigned()) throw Error(ErrorCode::MalformedStroke, "keypoint must be an index");
    keypoint = j["keypoint"].get<std::size_t>();
  }
  try {
    trajectory::Stroke s = trajectory::extract_fingertip_stroke(trajectory::ingest_keypoint_stream(lines), keypoint);
    // The canvas is the x-y plane; depth is discarded.
    for (auto& p : s.points) p.pos.z() = 0.0;
    trajectory::validate_stroke(s);
    return s;
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedStroke, e.detail());
  }
}

std::size_t query_index(const std::map<std::string, std::string>& query, const std::string& key,
                        std::size_t fallback) {
  const auto it = query.find(key);
  if (it == query.end() || it->second.empty()) return fallback;
  std::size_t value = 0;
  const auto* end = it->second.data() + it->second.size();
  const auto [ptr, ec] = std::from_chars(it->second.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error(ErrorCode::RangeOutOfBounds, key + " must be a non-negative integer");
  return value;
}

json frame_json(const physics::Frame& f) {
  json bodies = json::array();
  for (const auto& b : f.bodies) {
    const Quat& q = b.orientation;
    bodies.push_back({{"id", b.id},
                      {"position", vec_json(b.position)},
                      {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})},
                      {"linear_velocity", vec_json(b.linear_velocity)},
                      {"angular_velocity", vec_json(b.angular_velocity)}});
  }
  return json{{"index", f.index}, {"time", f.time}, {"bodies", bodies}};
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Editing: return "editing";
    case Status::Simulating: return "simulating";
    case Status::Done: return "done";
    case Status::Failed: return "failed";
  }
  return "editing";
}

Service::Service(Options options)
    : options_(std::move(options)),
      table_(options_.material_table_path ? recognition::MaterialTable::load(*options_.material_table_path)
                                          : recognition::MaterialTable::builtin()) {
  pipeline::validate(options_.defaults);
  fs::create_directories(fs::path(options_.data_dir) / "sessions");
  load_existing();
}

Service::~Service() { wait_idle(); }

void Service::wait_idle() {
  for (;;) {
    std::vector<std::thread> jobs;
    {
      std::lock_guard lock(jobs_mutex_);
      jobs.swap(jobs_);
    }
    if (jobs.empty()) return;
    for (auto& t : jobs) t.join();
  }
}

std::string Service::session_dir(const std::string& id) const {
  return (fs::path(options_.data_dir) / "sessions" / id).string();
}

std::string Service::new_id() {
  static std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  for (;;) {
    std::string id;
    std::uint64_t bits = rng();
    for (int i = 0; i < 16; ++i, bits >>= 4) id.push_back(kHex[bits & 0xf]);
    if (!sessions_.count(id) && !fs::exists(session_dir(id))) return id;
  }
}

void Service::load_existing() {
  const fs::path root = fs::path(options_.data_dir) / "sessions";
  for (const auto& entry : fs::directory_iterator(root)) {
    const fs::path meta = entry.path() / "session.json";
    if (!entry.is_directory() || !fs::exists(meta)) continue;
    auto s = std::make_shared<Session>();
    const json j = json::parse(read_file(meta));
    s->id = j.at("id").get<std::string>();
    s->status = status_from_string(j.at("status").get<std::string>());
    s->revision = j.at("revision").get<int>();
    s->runs = j.at("runs").get<int>();
    s->error = j.value("error", "");
    pipeline::apply_settings_json(s->settings, j.at("settings").dump());
    s->canvas = pipeline::parse_canvas(read_file(entry.path() / "canvas.json"));
    s->gestures = pipeline::parse_gestures(read_file(entry.path() / "gestures.json"));
    if (s->status == Status::Simulating) {
      // The process died mid-run; the partial outputs are not trustworthy.
      s->status = Status::Failed;
      s->error = "run interrupted by a server restart";
      persist(*s);
    }
    sessions_[s->id] = std::move(s);
  }
}

void Service::persist(const Session& s) const {
  const fs::path dir(session_dir(s.id));
  fs::create_directories(dir);
  json meta{{"id", s.id},
            {"status", std::string(to_string(s.status))},
            {"revision", s.revision},
            {"runs", s.runs},
            {"error", s.error},
            {"settings", json::parse(pipeline::settings_to_json(s.settings))}};
  write_file(dir / "session.json", meta.dump(2) + "\n");
  write_file(dir / "canvas.json", pipeline::canvas_to_json(s.canvas));
  write_file(dir / "gestures.json", pipeline::gestures_to_json(s.gestures));
}

pipeline::Inputs Service::inputs_of(const Session& s) const {
  pipeline::Inputs in;
  in.canvas = s.canvas;
  in.gestures = s.gestures;
  in.table = table_;
  return in;
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
  return it->second;
}

Response Service::handle(const Request& request) {
  try {
    return dispatch(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(400, std::string(to_string(ErrorCode::MalformedRecord)), e.what());
  } catch (const std::exception& e) {
    return error_response(500, std::string(to_string(ErrorCode::IoError)), e.what());
  }
}

Response Service::dispatch(const Request& r) {
  const auto parts = split_path(r.path);
  const auto method_not_allowed = [&] {
    return error_response(405, "MethodNotAllowed", r.method + " " + r.path);
  };
  if (parts.empty() || parts[0] != "sessions") return error_response(404, "NotFound", r.path);
  if (parts.size() == 1) {
    if (r.method == "POST") return create_session(r.body);
    if (r.method == "GET") return list_sessions();
    return method_not_allowed();
  }
  const auto session = find(parts[1]);
  if (parts.size() == 2) {
    if (r.method != "GET") return method_not_allowed();
    std::lock_guard lock(session->mutex);
    return describe(*session);
  }
  const std::string& leaf = parts.back();
  if (parts.size() == 3 && leaf == "simulate") {
    if (r.method != "POST") return method_not_allowed();
    return simulate(session, r.body);
  }
  std::lock_guard lock(session->mutex);
  if (parts.size() == 3 && leaf == "strokes") {
    if (r.method != "POST") return method_not_allowed();
    return submit_stroke(*session, r.body);
  }
  if (parts.size() == 3 && leaf == "frames") {
    if (r.method != "GET") return method_not_allowed();
    return get_frames(*session, r.query);
  }
  if (parts.size() == 3 && leaf == "export") {
    if (r.method != "GET") return method_not_allowed();
    return export_artifact(*session, r.query);
  }
  if (parts.size() == 5 && parts[2] == "objects" && leaf == "gesture") {
    if (r.method != "POST") return method_not_allowed();
    return bind_gesture(*session, parts[3], r.body);
  }
  return error_response(404, "NotFound", r.path);
}

Response Service::create_session(const std::string& body) {
  const json j = parse_body(body);
  auto s = std::make_shared<Session>();
  s->settings = options_.defaults;
  Vec2 extent(kDefaultExtent, kDefaultExtent);
  if (j.contains("extent")) {
    const json& e = j["extent"];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number() || !(e[0].get<double>() > 0.0) ||
        !(e[1].get<double>() > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "extent must be [w, h] with positive entries");
    }
    extent = Vec2(e[0].get<double>(), e[1].get<double>());
  }
  s->canvas.extent.max = extent;
  if (j.contains("settings")) pipeline::apply_settings_json(s->settings, j["settings"].dump());
  {
    std::lock_guard lock(registry_mutex_);
    s->id = new_id();
    persist(*s);
    sessions_[s->id] = s;
  }
  return json_response(201, json{{"id", s->id}, {"status", "editing"}, {"revision", 0}});
}

Response Service::list_sessions() {
  json arr = json::array();
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(registry_mutex_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  for (const auto& s : all) {
    std::lock_guard lock(s->mutex);
    arr.push_back({{"id", s->id}, {"status", std::string(to_string(s->status))}, {"revision", s->revision}});
  }
  return json_response(200, json{{"sessions", arr}});
}

Response Service::describe(Session& s) {
  json objects = json::array();
  if (s.status != Status::Simulating && !s.canvas.strokes.empty()) {
    try {
      pipeline::Inputs in = inputs_of(s);
      in.gestures.clear();
      const auto built = pipeline::build_scene(in, s.settings, recognition::EndpointConfig{});
      for (const auto* o : scene::sorted_objects(built.scene)) {
        objects.push_back({{"id", o->id},
                           {"kind", std::string(scene::to_string(o->kind))},
                           {"material", std::string(recognition::to_string(o->profile.label))},
                           {"mass_kg", o->mass.mass_kg}});
      }
    } catch (const Error&) {
      // An unfinished drawing may not segment yet; the object list stays empty.
    }
  }
  json gestures = json::array();
  for (const auto& g : s.gestures) gestures.push_back(g.object_id);
  json out{{"id", s.id},
           {"status", std::string(to_string(s.status))},
           {"revision", s.revision},
           {"runs", s.runs},
           {"objects", objects},
           {"gestures", gestures},
           {"settings", json::parse(pipeline::settings_to_json(s.settings))}};
  if (!s.error.empty()) out["error"] = s.error;
  if (s.status == Status::Done) out["frame_count"] = s.frames ? s.frames->frames.size() : 0;
  return json_response(200, out);
}

Response Service::submit_stroke(Session& s, const std::string& body) {
  if (s.status == Status::Simulating) throw Error(ErrorCode::BadStatus, "session is simulating");
  const json j = parse_body(body);
  trajectory::Stroke stroke = stroke_from_payload(j);
  for (const auto& p : stroke.points) {
    if (!s.canvas.extent.contains(p.pos.head<2>())) {
      throw Error(ErrorCode::MalformedStroke, "stroke point outside the canvas extent");
    }
  }
  s.canvas.strokes.push_back(std::move(stroke));
  ++s.revision;
  s.status = Status::Editing;
  s.error.clear();
  s.frames.reset();
  persist(s);
  return json_response(200, json{{"revision", s.revision}});
}

Response Service::bind_gesture(Session& s, const std::string& object_id, const std::string& body) {
  if (s.status == Status::Simulating) throw Error(ErrorCode::BadStatus, "session is simulating");
  const json j = parse_body(body);
  pipeline::GestureBinding binding;
  binding.object_id = object_id;
  binding.stroke = stroke_from_payload(j.contains("stroke") ? json{{"points", j["stroke"]}} : j);
  if (j.contains("m_hand")) binding.m_hand = j["m_hand"].get<double>();
  if (j.contains("alpha")) binding.alpha = j["alpha"].get<double>();

  pipeline::Inputs in = inputs_of(s);
  in.gestures.clear();
  const auto built = pipeline::build_scene(in, s.settings, options_.endpoint);
  const auto it = std::find_if(built.scene.objects.begin(), built.scene.objects.end(),
                               [&](const auto& o) { return o.id == object_id; });
  if (it == built.scene.objects.end()) throw Error(ErrorCode::UnknownObject, object_id);
  const auto t = pipeline::transfer_gesture(binding.stroke, it->mass.mass_kg, it->profile, s.settings, binding.m_hand,
                                            binding.alpha);

  std::erase_if(s.gestures, [&](const auto& g) { return g.object_id == object_id; });
  s.gestures.push_back(std::move(binding));
  std::sort(s.gestures.begin(), s.gestures.end(),
            [](const auto& a, const auto& b) { return a.object_id < b.object_id; });
  s.status = Status::Editing;
  s.error.clear();
  s.frames.reset();
  persist(s);

  const Vec3 v_obj(scene::quantize9(t.v_obj.x()), scene::quantize9(t.v_obj.y()), scene::quantize9(t.v_obj.z()));
  return json_response(200, json{{"object", object_id},
                                 {"v_hand", vec_json(t.v_hand)},
                                 {"v_obj", vec_json(v_obj)},
                                 {"m_hand", t.m_hand},
                                 {"m_obj", t.m_obj},
                                 {"alpha", t.alpha},
                                 {"factor", recognition::transfer_factor(t.m_hand, t.m_obj, t.alpha)}});
}

void Service::finish_run(Session& s, pipeline::Artifacts artifacts) {
  pipeline::write_artifacts(artifacts, session_dir(s.id));
  s.frames = physics::decode_frame_log(artifacts.frame_log);
  s.body_ids = scene::body_order(scene::from_json_text(artifacts.scene_json, table_));
  s.status = Status::Done;
  s.error.clear();
  persist(s);
}

Response Service::simulate(const std::shared_ptr<Session>& session, const std::string& body) {
  const json j = parse_body(body);
  std::unique_lock lock(session->mutex);
  Session& s = *session;
  if (s.status == Status::Simulating) throw Error(ErrorCode::BadStatus, "session is already simulating");
  if (j.contains("duration")) {
    pipeline::Settings next = s.settings;
    if (!j["duration"].is_number()) throw Error(ErrorCode::InvalidConfig, "duration must be a number");
    next.duration = j["duration"].get<double>();
    pipeline::validate(next);
    s.settings = next;
  }
  const pipeline::Inputs inputs = inputs_of(s);
  const pipeline::Settings settings = s.settings;
  ++s.runs;
  const int run_id = s.runs;
  s.status = Status::Simulating;
  s.frames.reset();
  persist(s);

  auto run = [this, inputs, settings] {
    return pipeline::produce_artifacts(pipeline::build_scene(inputs, settings, options_.endpoint), settings);
  };

  if (settings.duration <= settings.async_threshold) {
    try {
      finish_run(s, run());
    } catch (const Error& e) {
      s.status = Status::Failed;
      s.error = e.what();
      persist(s);
      return error_response(e);
    }
    return json_response(200, json{{"run_id", run_id}, {"status", "done"}, {"frame_count", s.frames->frames.size()}});
  }

  lock.unlock();
  std::lock_guard jobs_lock(jobs_mutex_);
  jobs_.emplace_back([this, session, run]() {
    std::optional<pipeline::Artifacts> artifacts;
    std::string error;
    try {
      artifacts = run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard lock(session->mutex);
    try {
      if (artifacts) {
        finish_run(*session, std::move(*artifacts));
        return;
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
    session->status = Status::Failed;
    session->error = error;
    persist(*session);
  });
  return json_response(202, json{{"run_id", run_id}, {"status", "simulating"}});
}

Response Service::get_frames(Session& s, const std::map<std::string, std::string>& query) {
  if (s.status != Status::Done) {
    throw Error(ErrorCode::BadStatus, "no finished run (status " + std::string(to_string(s.status)) + ")");
  }
  if (!s.frames) {
    const fs::path dir(session_dir(s.id));
    s.frames = physics::decode_frame_log(read_file(dir / "frames.spf"));
    s.body_ids = scene::body_order(scene::from_json_text(read_file(dir / "scene.json"), table_));
  }
  const auto& frames = s.frames->frames;
  const std::size_t from = query_index(query, "from", 0);
  const std::size_t to = query_index(query, "to", frames.size());
  if (from > to || to > frames.size()) {
    throw Error(ErrorCode::RangeOutOfBounds, "requested [" + std::to_string(from) + ", " + std::to_string(to) +
                                                 ") of " + std::to_string(frames.size()) + " frames");
  }
  json arr = json::array();
  for (std::size_t i = from; i < to; ++i) {
    physics::Frame f;
    f.index = static_cast<std::int64_t>(i) + 1;
    f.time = static_cast<double>(f.index) * s.frames->dt;
    f.bodies = frames[i];
    for (std::size_t b = 0; b < f.bodies.size() && b < s.body_ids.size(); ++b) f.bodies[b].id = s.body_ids[b];
    arr.push_back(frame_json(f));
  }
  return json_response(200, json{{"frame_count", frames.size()}, {"from", from}, {"to", to}, {"frames", arr}});
}

Response Service::export_artifact(Session& s, const std::map<std::string, std::string>& query) {
  const auto it = query.find("kind");
  const std::string kind = it == query.end() ? "" : it->second;
  const fs::path dir(session_dir(s.id));
  if (kind == "script" || kind == "scene") {
    std::string bytes;
    if (s.status == Status::Done) {
      bytes = read_file(dir / (kind == "script" ? "scene_script.py" : "scene.json"));
    } else {
      const auto built = pipeline::build_scene(inputs_of(s), s.settings, options_.endpoint);
      bytes = kind == "script" ? emitter::emit_script(built.scene).text : scene::to_json_text(built.scene);
    }
    return {200, kind == "script" ? "text/x-python" : "application/json", std::move(bytes)};
  }
  if (kind != "frames" && kind != "priors") {
    throw Error(ErrorCode::InvalidConfig, "kind must be script, scene, frames or priors");
  }
  if (s.status != Status::Done) {
    throw Error(ErrorCode::BadStatus, "no finished run (status " + std::string(to_string(s.status)) + ")");
  }
  if (kind == "frames") return {200, "application/octet-stream", read_file(dir / "frames.spf")};
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& entry : fs::directory_iterator(dir / "priors")) {
    files.emplace_back(entry.path().filename().string(), read_file(entry.path()));
  }
  std::sort(files.begin(), files.end());
  return {200, "application/x-tar", pipeline::make_tar(files)};
}

void Service::mount(httplib::Server& server) {
  const auto adapter = [this](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const Response out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(".*", adapter);
  server.Post(".*", adapter);
  server.Put(".*", adapter);
  server.Delete(".*", adapter);
  server.Patch(".*", adapter);
}

void options_from_environment(Options& options, std::string* host, int* port) {
  *host = "127.0.0.1";
  *port = 8080;
  if (const char* addr = std::getenv("SKETCHPLAY_ADDR"); addr && *addr) {
    const std::string a(addr);
    const auto colon = a.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "SKETCHPLAY_ADDR must be host:port");
    *host = a.substr(0, colon);
    const std::string p = a.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), *port);
    if (ec != std::errc() || ptr != p.data() + p.size() || *port < 0 || *port > 65535) {
      throw Error(ErrorCode::InvalidConfig, "bad port in SKETCHPLAY_ADDR");
    }
  }
  if (const char* dir = std::getenv("SKETCHPLAY_DATA_DIR"); dir && *dir) options.data_dir = dir;
  options.endpoint = recognition::EndpointConfig::from_environment();
}

}  // namespace sketchplay::service
