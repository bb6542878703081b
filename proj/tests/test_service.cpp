#include "sketchplay/service.hpp"

#include "sketchplay/physics/frame_log.hpp"

#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace sketchplay::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kDomino = std::string(SKETCHPLAY_FIXTURE_DIR) + "/domino";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

pipeline::PipelineConfig domino_config() {
  pipeline::PipelineConfig c = pipeline::load_config(kDomino + "/config.json");
  c.settings.backend = pipeline::Backend::Rule;
  return c;
}

Options scratch_options(const std::string& name) {
  Options o;
  o.data_dir = sketchplay::testing::scratch_dir(name).string();
  o.defaults = domino_config().settings;
  return o;
}

Response call(Service& svc, const std::string& method, const std::string& path, const std::string& body = "",
              std::map<std::string, std::string> query = {}) {
  return svc.handle({method, path, std::move(query), body});
}

json body_of(const Response& r) { return json::parse(r.body); }

std::string error_of(const Response& r) { return body_of(r).at("error").get<std::string>(); }

json points_json(const trajectory::Stroke& s) {
  json pts = json::array();
  for (const auto& p : s.points) pts.push_back({{"t", p.t}, {"x", p.pos.x()}, {"y", p.pos.y()}});
  return pts;
}

// Creates a session with the domino settings and canvas extent, then draws
// every fixture stroke and binds the fixture gesture. `overrides` patches
// the session settings.
std::string draw_domino(Service& svc, const json& overrides = json::object()) {
  const auto c = domino_config();
  const auto canvas = pipeline::parse_canvas(slurp(c.canvas_path));
  json settings = json::parse(pipeline::settings_to_json(c.settings));
  settings.update(overrides);
  const json create{{"extent", {canvas.extent.max.x(), canvas.extent.max.y()}}, {"settings", settings}};
  const Response created = call(svc, "POST", "/sessions", create.dump());
  EXPECT_EQ(created.status, 201) << created.body;
  const std::string id = body_of(created).at("id");
  for (const auto& s : canvas.strokes) {
    const Response r = call(svc, "POST", "/sessions/" + id + "/strokes", json{{"points", points_json(s)}}.dump());
    EXPECT_EQ(r.status, 200) << r.body;
  }
  for (const auto& g : pipeline::parse_gestures(slurp(*c.gestures_path))) {
    json payload{{"stroke", points_json(g.stroke)}};
    if (g.m_hand) payload["m_hand"] = *g.m_hand;
    if (g.alpha) payload["alpha"] = *g.alpha;
    const Response r = call(svc, "POST", "/sessions/" + id + "/objects/" + g.object_id + "/gesture", payload.dump());
    EXPECT_EQ(r.status, 200) << r.body;
  }
  return id;
}

// Minimal ustar reader: name -> contents.
std::map<std::string, std::string> untar(const std::string& tar) {
  std::map<std::string, std::string> files;
  std::size_t at = 0;
  while (at + 512 <= tar.size() && tar[at] != '\0') {
    const std::string name(tar.c_str() + at);
    const std::size_t size = std::stoul(tar.substr(at + 124, 11), nullptr, 8);
    files[name] = tar.substr(at + 512, size);
    at += 512 + (size + 511) / 512 * 512;
  }
  return files;
}

TEST(Sessions, CreateListDescribe) {
  Service svc(scratch_options("svc-basic"));
  const Response created = call(svc, "POST", "/sessions", "{}");
  ASSERT_EQ(created.status, 201);
  const json c = body_of(created);
  EXPECT_EQ(c["status"], "editing");
  EXPECT_EQ(c["revision"], 0);
  const std::string id = c["id"];
  EXPECT_EQ(id.size(), 16u);

  const json list = body_of(call(svc, "GET", "/sessions"));
  ASSERT_EQ(list["sessions"].size(), 1u);
  EXPECT_EQ(list["sessions"][0]["id"], id);

  const json d = body_of(call(svc, "GET", "/sessions/" + id));
  EXPECT_TRUE(d["objects"].empty());
  EXPECT_EQ(d["runs"], 0);
  EXPECT_FALSE(d.contains("frame_count"));
}

TEST(Sessions, DrawingProducesObjectsAndGestureTransfer) {
  Service svc(scratch_options("svc-draw"));
  const std::string id = draw_domino(svc);
  const json d = body_of(call(svc, "GET", "/sessions/" + id));
  EXPECT_EQ(d["revision"], 5);
  ASSERT_EQ(d["objects"].size(), 5u);
  for (const auto& o : d["objects"]) {
    EXPECT_EQ(o["kind"], "rigid");
    EXPECT_EQ(o["material"], "wood");
  }
  EXPECT_EQ(d["gestures"], json::array({"obj-0"}));

  // The response factor is the transfer law evaluated on the echoed masses.
  const auto g = pipeline::parse_gestures(slurp(*domino_config().gestures_path));
  const Response r = call(svc, "POST", "/sessions/" + id + "/objects/obj-0/gesture",
                          json{{"stroke", points_json(g[0].stroke)}, {"alpha", 0.5}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const json t = body_of(r);
  EXPECT_EQ(t["alpha"], 0.5);
  EXPECT_DOUBLE_EQ(t["factor"].get<double>(),
                   recognition::transfer_factor(t["m_hand"].get<double>(), t["m_obj"].get<double>(), 0.5));
  EXPECT_NEAR(t["v_obj"][0].get<double>(), t["factor"].get<double>() * t["v_hand"][0].get<double>(), 1e-8);
  // Rebinding replaces rather than appends.
  EXPECT_EQ(body_of(call(svc, "GET", "/sessions/" + id))["gestures"].size(), 1u);
}

TEST(Simulate, MatchesPipelineBytesAndServesFrames) {
  Service svc(scratch_options("svc-sim"));
  const std::string id = draw_domino(svc);
  const std::string base = "/sessions/" + id;

  EXPECT_EQ(call(svc, "GET", base + "/frames").status, 409);
  EXPECT_EQ(call(svc, "GET", base + "/export", "", {{"kind", "frames"}}).status, 409);

  const Response sim = call(svc, "POST", base + "/simulate", "{}");
  ASSERT_EQ(sim.status, 200) << sim.body;
  EXPECT_EQ(body_of(sim)["status"], "done");
  EXPECT_EQ(body_of(sim)["run_id"], 1);
  EXPECT_EQ(body_of(sim)["frame_count"], 360);

  // Same inputs through the batch pipeline give the same artifacts.
  const auto c = domino_config();
  const auto expected =
      pipeline::produce_artifacts(pipeline::build_scene(pipeline::load_inputs(c), c.settings, {}), c.settings);
  const Response script = call(svc, "GET", base + "/export", "", {{"kind", "script"}});
  EXPECT_EQ(script.content_type, "text/x-python");
  EXPECT_EQ(script.body, expected.script);
  EXPECT_EQ(call(svc, "GET", base + "/export", "", {{"kind", "scene"}}).body, expected.scene_json);
  EXPECT_EQ(call(svc, "GET", base + "/export", "", {{"kind", "frames"}}).body, expected.frame_log);
  const auto priors = untar(call(svc, "GET", base + "/export", "", {{"kind", "priors"}}).body);
  ASSERT_EQ(priors.size(), expected.priors.size());
  for (const auto& [name, bytes] : expected.priors) EXPECT_EQ(priors.at(name), bytes) << name;

  const json all = body_of(call(svc, "GET", base + "/frames"));
  EXPECT_EQ(all["frame_count"], 360);
  ASSERT_EQ(all["frames"].size(), 360u);
  const json window = body_of(call(svc, "GET", base + "/frames", "", {{"from", "10"}, {"to", "12"}}));
  ASSERT_EQ(window["frames"].size(), 2u);
  EXPECT_EQ(window["frames"][0], all["frames"][10]);
  EXPECT_EQ(window["frames"][0]["index"], 11);
  EXPECT_NEAR(window["frames"][0]["time"].get<double>(), 11 * c.settings.dt, 1e-12);
  const auto log = physics::decode_frame_log(expected.frame_log);
  const json& b0 = window["frames"][0]["bodies"][0];
  EXPECT_EQ(b0["id"], "obj-0");
  EXPECT_EQ(b0["position"][0].get<double>(), log.frames[10][0].position.x());

  EXPECT_EQ(call(svc, "GET", base + "/frames", "", {{"from", "5"}, {"to", "361"}}).status, 416);
  EXPECT_EQ(call(svc, "GET", base + "/frames", "", {{"from", "6"}, {"to", "5"}}).status, 416);
  EXPECT_EQ(call(svc, "GET", base + "/frames", "", {{"from", "-1"}}).status, 416);
  EXPECT_TRUE(body_of(call(svc, "GET", base + "/frames", "", {{"from", "360"}}))["frames"].empty());

  // An edit invalidates the run.
  const auto g = pipeline::parse_gestures(slurp(*c.gestures_path));
  call(svc, "POST", base + "/objects/obj-0/gesture", json{{"stroke", points_json(g[0].stroke)}}.dump());
  EXPECT_EQ(body_of(call(svc, "GET", base))["status"], "editing");
  EXPECT_EQ(call(svc, "GET", base + "/frames").status, 409);
}

TEST(Simulate, BackgroundRunRejectsEdits) {
  Service svc(scratch_options("svc-async"));
  const std::string id = draw_domino(svc, {{"async_threshold", 0.0}});
  const std::string base = "/sessions/" + id;

  const Response sim = call(svc, "POST", base + "/simulate", json{{"duration", 0.5}}.dump());
  ASSERT_EQ(sim.status, 202) << sim.body;
  EXPECT_EQ(body_of(sim)["status"], "simulating");
  // The run may already have finished; if not, edits bounce.
  const Response edit = call(svc, "POST", base + "/strokes", json{{"points", json::array()}}.dump());
  EXPECT_TRUE(edit.status == 409 || edit.status == 400) << edit.status;
  svc.wait_idle();

  const json d = body_of(call(svc, "GET", base));
  EXPECT_EQ(d["status"], "done");
  EXPECT_EQ(d["frame_count"], 120);
  EXPECT_EQ(d["settings"]["duration"], 0.5);
}

TEST(Persistence, InterruptedRunBecomesFailed) {
  // A session persisted mid-run comes back failed after a restart.
  const Options o = scratch_options("svc-restart");
  std::string id;
  {
    Service svc(o);
    id = draw_domino(svc);
  }
  const fs::path meta = fs::path(o.data_dir) / "sessions" / id / "session.json";
  json j = json::parse(slurp(meta));
  j["status"] = "simulating";
  std::ofstream(meta) << j.dump(2);

  Service reloaded(o);
  const json d = body_of(call(reloaded, "GET", "/sessions/" + id));
  EXPECT_EQ(d["status"], "failed");
  EXPECT_EQ(d["error"], "run interrupted by a server restart");
  EXPECT_EQ(d["objects"].size(), 5u);
  EXPECT_EQ(call(reloaded, "GET", "/sessions/" + id + "/frames").status, 409);
  EXPECT_EQ(json::parse(slurp(meta))["status"], "failed");
}

TEST(Persistence, FinishedRunSurvivesRestart) {
  const Options o = scratch_options("svc-persist");
  std::string id, frames, script;
  {
    Service svc(o);
    id = draw_domino(svc);
    ASSERT_EQ(call(svc, "POST", "/sessions/" + id + "/simulate", json{{"duration", 0.25}}.dump()).status, 200);
    frames = call(svc, "GET", "/sessions/" + id + "/frames", "", {{"from", "0"}, {"to", "3"}}).body;
    script = call(svc, "GET", "/sessions/" + id + "/export", "", {{"kind", "script"}}).body;
  }
  Service svc(o);
  const json d = body_of(call(svc, "GET", "/sessions/" + id));
  EXPECT_EQ(d["status"], "done");
  EXPECT_EQ(d["runs"], 1);
  EXPECT_EQ(d["revision"], 5);
  EXPECT_EQ(call(svc, "GET", "/sessions/" + id + "/frames", "", {{"from", "0"}, {"to", "3"}}).body, frames);
  EXPECT_EQ(call(svc, "GET", "/sessions/" + id + "/export", "", {{"kind", "script"}}).body, script);
}

TEST(Errors, StatusCodesAndBodies) {
  Service svc(scratch_options("svc-errors"));
  EXPECT_EQ(call(svc, "GET", "/nowhere").status, 404);
  EXPECT_EQ(error_of(call(svc, "GET", "/nowhere")), "NotFound");
  EXPECT_EQ(call(svc, "DELETE", "/sessions").status, 405);
  EXPECT_EQ(error_of(call(svc, "GET", "/sessions/feedbeef")), "UnknownSession");
  EXPECT_EQ(call(svc, "GET", "/sessions/feedbeef").status, 404);
  EXPECT_EQ(call(svc, "POST", "/sessions", "not json").status, 400);
  EXPECT_EQ(call(svc, "POST", "/sessions", R"({"extent": [1, -1]})").status, 400);
  EXPECT_EQ(call(svc, "POST", "/sessions", R"({"settings": {"duration": 0}})").status, 400);

  const std::string id = body_of(call(svc, "POST", "/sessions", R"({"extent": [1, 1]})"))["id"];
  const std::string base = "/sessions/" + id;
  EXPECT_EQ(call(svc, "PUT", base).status, 405);
  EXPECT_EQ(call(svc, "GET", base + "/simulate").status, 405);
  EXPECT_EQ(call(svc, "GET", base + "/strokes").status, 405);
  EXPECT_EQ(call(svc, "GET", base + "/unknown").status, 404);
  EXPECT_EQ(error_of(call(svc, "POST", base + "/strokes", R"({"nothing": 1})")), "MalformedStroke");
  EXPECT_EQ(error_of(call(svc, "POST", base + "/strokes",
                          R"({"points": [{"t": 0, "x": 0.1, "y": 0.1}, {"t": 0.1, "x": 2, "y": 0.1}]})")),
            "MalformedStroke");
  EXPECT_EQ(call(svc, "GET", base + "/export", "", {{"kind", "video"}}).status, 400);

  ASSERT_EQ(call(svc, "POST", base + "/strokes",
                 R"({"points": [{"t": 0, "x": 0.1, "y": 0.1}, {"t": 0.05, "x": 0.2, "y": 0.1},
                                {"t": 0.1, "x": 0.2, "y": 0.2}, {"t": 0.15, "x": 0.1, "y": 0.2},
                                {"t": 0.2, "x": 0.1, "y": 0.1}]})")
                .status,
            200);
  const Response unknown = call(svc, "POST", base + "/objects/obj-9/gesture",
                                R"({"stroke": [{"t": 0, "x": 0, "y": 0}, {"t": 0.1, "x": 0.1, "y": 0}]})");
  EXPECT_EQ(unknown.status, 404);
  EXPECT_EQ(error_of(unknown), "UnknownObject");
}

TEST(Http, RoundTripThroughARealServer) {
  Service svc(scratch_options("svc-http"));
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto created = client.Post("/sessions", R"({"extent": [2, 2]})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = json::parse(created->body)["id"];
  const auto missing = client.Get("/sessions/" + id + "/frames?from=0&to=1");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 409);
  EXPECT_EQ(json::parse(missing->body)["error"], "BadStatus");
  const auto script = client.Get("/sessions/" + id + "/export?kind=scene");
  ASSERT_TRUE(script);
  EXPECT_EQ(script->status, 200);
  EXPECT_TRUE(json::parse(script->body)["objects"].empty());

  server.stop();
  loop.join();
}

TEST(Environment, AddressAndDataDir) {
  Options o;
  std::string host;
  int port = 0;
  ::setenv("SKETCHPLAY_ADDR", "0.0.0.0:9123", 1);
  ::setenv("SKETCHPLAY_DATA_DIR", "/tmp/elsewhere", 1);
  options_from_environment(o, &host, &port);
  EXPECT_EQ(host, "0.0.0.0");
  EXPECT_EQ(port, 9123);
  EXPECT_EQ(o.data_dir, "/tmp/elsewhere");
  ::setenv("SKETCHPLAY_ADDR", "no-port", 1);
  EXPECT_ERROR_CODE(options_from_environment(o, &host, &port), ErrorCode::InvalidConfig);
  ::setenv("SKETCHPLAY_ADDR", "h:99999", 1);
  EXPECT_ERROR_CODE(options_from_environment(o, &host, &port), ErrorCode::InvalidConfig);
  ::unsetenv("SKETCHPLAY_ADDR");
  ::unsetenv("SKETCHPLAY_DATA_DIR");
}

}  // namespace
}  // namespace sketchplay::service
