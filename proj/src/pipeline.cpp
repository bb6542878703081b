#include "sketchplay/pipeline.hpp"

#include "sketchplay/emitter/emitter.hpp"
#include "sketchplay/physics/frame_log.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace sketchplay::pipeline {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + ": " + e.what());
  }
}

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::Rule: return "rule";
    case Backend::Remote: return "remote";
    case Backend::Auto: return "auto";
  }
  return "auto";
}

std::string_view to_string(VelocitySource v) {
  switch (v) {
    case VelocitySource::Release: return "release";
    case VelocitySource::Mean: return "mean";
    case VelocitySource::Peak: return "peak";
  }
  return "release";
}

template <typename T>
T number_of(const json& v, const std::string& key) {
  if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" must be an integer");
  }
  return v.get<T>();
}

bool bool_of(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" must be true or false");
  return v.get<bool>();
}

std::string string_of(const json& v, const std::string& key) {
  if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" must be a string");
  return v.get<std::string>();
}

// Returns false if `key` is not a settings key.
bool apply_setting(Settings& s, const std::string& key, const json& v) {
  if (key == "prompt") {
    if (v.is_null()) s.prompt.reset();
    else s.prompt = string_of(v, key);
  } else if (key == "m_hand") {
    s.m_hand = number_of<double>(v, key);
  } else if (key == "dt") {
    s.dt = number_of<double>(v, key);
  } else if (key == "solver_iterations") {
    s.solver_iterations = number_of<int>(v, key);
  } else if (key == "duration") {
    s.duration = number_of<double>(v, key);
  } else if (key == "fps") {
    s.fps = number_of<double>(v, key);
  } else if (key == "ground") {
    s.ground = bool_of(v, key);
  } else if (key == "backend") {
    const std::string b = string_of(v, key);
    if (b == "rule") s.backend = Backend::Rule;
    else if (b == "remote") s.backend = Backend::Remote;
    else if (b == "auto") s.backend = Backend::Auto;
    else throw Error(ErrorCode::InvalidConfig, "backend must be rule, remote or auto");
  } else if (key == "thickness") {
    if (v.is_null()) s.thickness.reset();
    else s.thickness = number_of<double>(v, key);
  } else if (key == "fit_primitives") {
    s.fit_primitives = bool_of(v, key);
  } else if (key == "beautify_epsilon") {
    s.beautify_epsilon = number_of<double>(v, key);
  } else if (key == "temporal_gap") {
    s.temporal_gap = number_of<double>(v, key);
  } else if (key == "spatial_gap_fraction") {
    s.spatial_gap_fraction = number_of<double>(v, key);
  } else if (key == "release_window") {
    s.release_window = number_of<double>(v, key);
  } else if (key == "velocity_source") {
    const std::string src = string_of(v, key);
    if (src == "release") s.velocity_source = VelocitySource::Release;
    else if (src == "mean") s.velocity_source = VelocitySource::Mean;
    else if (src == "peak") s.velocity_source = VelocitySource::Peak;
    else throw Error(ErrorCode::InvalidConfig, "velocity_source must be release, mean or peak");
  } else if (key == "cloth_spacing") {
    s.cloth_spacing = number_of<double>(v, key);
  } else if (key == "cloth_thickness") {
    s.cloth_thickness = number_of<double>(v, key);
  } else if (key == "prior_stride") {
    s.prior_stride = number_of<int>(v, key);
  } else if (key == "prior_width") {
    s.prior_width = number_of<int>(v, key);
  } else if (key == "prior_height") {
    s.prior_height = number_of<int>(v, key);
  } else if (key == "edge_threshold") {
    s.edge_threshold = number_of<double>(v, key);
  } else if (key == "prior_ground") {
    s.prior_ground = bool_of(v, key);
  } else if (key == "async_threshold") {
    s.async_threshold = number_of<double>(v, key);
  } else {
    return false;
  }
  return true;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

json stroke_to_json(const trajectory::Stroke& s) {
  json pts = json::array();
  for (const auto& p : s.points) pts.push_back(json{{"t", p.t}, {"x", p.pos.x()}, {"y", p.pos.y()}});
  return pts;
}

trajectory::Stroke stroke_from_json(const json& pts) {
  if (!pts.is_array()) throw Error(ErrorCode::MalformedStroke, "stroke must be an array of points");
  trajectory::Stroke s;
  for (const auto& p : pts) {
    if (!p.is_object() || !p.contains("t") || !p.contains("x") || !p.contains("y") || !p["t"].is_number() ||
        !p["x"].is_number() || !p["y"].is_number()) {
      throw Error(ErrorCode::MalformedStroke, "stroke points need numeric t, x, y");
    }
    s.points.push_back({p["t"].get<double>(), Vec3(p["x"].get<double>(), p["y"].get<double>(), 0.0)});
  }
  try {
    trajectory::validate_stroke(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedStroke, e.detail());
  }
  return s;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

const Quat& upright() {
  // Local xy (the sketch plane) onto world xz; local +z onto world -y.
  static const Quat q(Eigen::AngleAxisd(0.5 * std::numbers::pi, Vec3::UnitX()));
  return q;
}

scene::SceneObject make_object(const sketch::SketchObject& obj, const recognition::MaterialProfile& profile,
                               const Settings& settings) {
  scene::SceneObject o;
  o.id = obj.id;
  o.profile = profile;
  if (profile.label == recognition::Material::Cloth) {
    const double w = obj.bbox.width(), h = obj.bbox.height();
    const double spacing = settings.cloth_spacing > 0.0 ? settings.cloth_spacing : std::max(w, h) / 15.0;
    if (!(spacing > 0.0)) throw Error(ErrorCode::DegenerateOutline, obj.id + ": cloth outline has no extent");
    o.kind = scene::BodyKind::Cloth;
    o.cloth.cols = std::max(2, static_cast<int>(std::lround(w / spacing)) + 1);
    o.cloth.rows = std::max(2, static_cast<int>(std::lround(h / spacing)) + 1);
    o.cloth.spacing = spacing;
    o.cloth.thickness = settings.cloth_thickness;
    o.cloth.pinned = {{0, 0}, {0, o.cloth.cols - 1}};
    o.position = canvas_to_world(0.5 * (obj.bbox.min + obj.bbox.max));
    o.orientation = upright();
    o.mass.volume_m3 = (o.cloth.rows - 1) * (o.cloth.cols - 1) * spacing * spacing * o.cloth.thickness;
    if (!(o.mass.volume_m3 >= recognition::kMinVolume)) {
      throw Error(ErrorCode::NonPositiveVolume, obj.id + ": cloth volume too small");
    }
    o.mass.mass_kg = profile.density_rho * o.mass.volume_m3;
    return o;
  }

  const double thickness = settings.thickness ? *settings.thickness : sketch::default_thickness(obj);
  const sketch::MeshPrimitive prim = sketch::lift_to_3d(obj, thickness, settings.fit_primitives);
  o.kind = scene::BodyKind::Rigid;
  o.mass = recognition::estimate_mass(obj, prim, profile);
  switch (prim.kind) {
    case sketch::PrimitiveKind::Sphere:
      o.shape = physics::Sphere{prim.radius};
      o.position = canvas_to_world(prim.center.head<2>());
      break;
    case sketch::PrimitiveKind::Box:
      o.shape = physics::Box{prim.half_extents};
      o.position = canvas_to_world(prim.center.head<2>());
      o.orientation = upright() * Quat(Eigen::AngleAxisd(prim.angle, Vec3::UnitZ()));
      break;
    case sketch::PrimitiveKind::ExtrudedPrism: {
      physics::ConvexPrism prism{prim.outline, prim.thickness};
      const Vec2 c = physics::center_outline(prism.outline);
      o.shape = prism;
      o.position = canvas_to_world(c);
      o.orientation = upright();
      break;
    }
  }
  return o;
}

void tar_octal(char* field, std::size_t width, std::uint64_t value) {
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

}  // namespace

// ---- configuration ------------------------------------------------------

void apply_settings_json(Settings& settings, const std::string& json_text) {
  const json j = parse_json(json_text, "settings");
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "settings must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!apply_setting(settings, key, value)) throw Error(ErrorCode::InvalidConfig, "unknown setting \"" + key + "\"");
  }
  validate(settings);
}

void apply_config_json(PipelineConfig& config, const std::string& json_text, const std::string& base_dir) {
  const json j = parse_json(json_text, "config");
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "canvas") config.canvas_path = resolve(base_dir, string_of(value, key));
    else if (key == "gestures") config.gestures_path = resolve(base_dir, string_of(value, key));
    else if (key == "material_table") config.material_table_path = resolve(base_dir, string_of(value, key));
    else if (key == "exemplars") config.exemplars_path = resolve(base_dir, string_of(value, key));
    else if (key == "output_dir") config.output_dir = resolve(base_dir, string_of(value, key));
    else if (!apply_setting(config.settings, key, value)) {
      throw Error(ErrorCode::InvalidConfig, "unknown config key \"" + key + "\"");
    }
  }
  validate(config.settings);
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig config;
  apply_config_json(config, read_file(path), fs::path(path).parent_path().string());
  return config;
}

std::string settings_to_json(const Settings& s) {
  json j{{"m_hand", s.m_hand},
         {"dt", s.dt},
         {"solver_iterations", s.solver_iterations},
         {"duration", s.duration},
         {"fps", s.fps},
         {"ground", s.ground},
         {"backend", std::string(to_string(s.backend))},
         {"fit_primitives", s.fit_primitives},
         {"beautify_epsilon", s.beautify_epsilon},
         {"temporal_gap", s.temporal_gap},
         {"spatial_gap_fraction", s.spatial_gap_fraction},
         {"release_window", s.release_window},
         {"velocity_source", std::string(to_string(s.velocity_source))},
         {"cloth_spacing", s.cloth_spacing},
         {"cloth_thickness", s.cloth_thickness},
         {"prior_stride", s.prior_stride},
         {"prior_width", s.prior_width},
         {"prior_height", s.prior_height},
         {"edge_threshold", s.edge_threshold},
         {"prior_ground", s.prior_ground},
         {"async_threshold", s.async_threshold}};
  j["prompt"] = s.prompt ? json(*s.prompt) : json(nullptr);
  j["thickness"] = s.thickness ? json(*s.thickness) : json(nullptr);
  return j.dump(2) + "\n";
}

void validate(const Settings& s) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, what);
  };
  require(s.m_hand > 0.0, "m_hand must be positive");
  require(s.dt > 0.0 && s.dt <= 1.0 / 60.0 + 1e-15, "dt must be in (0, 1/60]");
  require(s.solver_iterations >= 1, "solver_iterations must be >= 1");
  require(s.duration > 0.0 && std::isfinite(s.duration), "duration must be positive");
  require(s.fps > 0.0, "fps must be positive");
  require(!s.thickness || *s.thickness > 0.0, "thickness must be positive");
  require(s.beautify_epsilon >= 0.0, "beautify_epsilon must be >= 0");
  require(s.temporal_gap > 0.0, "temporal_gap must be positive");
  require(s.spatial_gap_fraction > 0.0 && s.spatial_gap_fraction < 1.0, "spatial_gap_fraction must be in (0, 1)");
  require(s.release_window > 0.0, "release_window must be positive");
  require(s.cloth_spacing >= 0.0, "cloth_spacing must be >= 0");
  require(s.cloth_thickness > 0.0, "cloth_thickness must be positive");
  require(s.prior_stride >= 1, "prior_stride must be >= 1");
  require(s.prior_width >= 8 && s.prior_height >= 8, "prior images must be at least 8x8");
  require(s.edge_threshold > 0.0, "edge_threshold must be positive");
  require(s.async_threshold >= 0.0, "async_threshold must be >= 0");
}

// ---- inputs ---------------------------------------------------------------

sketch::SketchCanvas parse_canvas(const std::string& json_text) {
  const json j = parse_json(json_text, "canvas");
  if (!j.is_object() || !j.contains("extent") || !j["extent"].is_array() || j["extent"].size() != 2) {
    throw Error(ErrorCode::MalformedRecord, "canvas needs \"extent\": [w, h]");
  }
  sketch::SketchCanvas canvas;
  canvas.extent.max = Vec2(number_of<double>(j["extent"][0], "extent"), number_of<double>(j["extent"][1], "extent"));
  if (!(canvas.extent.max.minCoeff() > 0.0)) throw Error(ErrorCode::MalformedRecord, "canvas extent must be positive");
  for (const auto& s : j.value("strokes", json::array())) {
    auto stroke = stroke_from_json(s);
    for (const auto& p : stroke.points) {
      if (!canvas.extent.contains(p.pos.head<2>())) {
        throw Error(ErrorCode::MalformedStroke, "stroke point outside the canvas extent");
      }
    }
    canvas.strokes.push_back(std::move(stroke));
  }
  return canvas;
}

std::string canvas_to_json(const sketch::SketchCanvas& canvas) {
  json strokes = json::array();
  for (const auto& s : canvas.strokes) strokes.push_back(stroke_to_json(s));
  const Vec2 extent = canvas.extent.max - canvas.extent.min;
  return json{{"extent", json::array({extent.x(), extent.y()})}, {"strokes", strokes}}.dump() + "\n";
}

trajectory::Stroke parse_stroke_points(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedStroke, e.what());
  }
  return stroke_from_json(j);
}

std::vector<GestureBinding> parse_gestures(const std::string& json_text) {
  const json j = parse_json(json_text, "gestures");
  if (!j.is_object() || !j.contains("gestures") || !j["gestures"].is_array()) {
    throw Error(ErrorCode::InvalidConfig, "gestures file needs a \"gestures\" array");
  }
  std::vector<GestureBinding> out;
  for (const auto& g : j["gestures"]) {
    GestureBinding b;
    if (!g.is_object() || !g.contains("object") || !g.contains("stroke")) {
      throw Error(ErrorCode::InvalidConfig, "each gesture needs \"object\" and \"stroke\"");
    }
    b.object_id = string_of(g["object"], "object");
    b.stroke = stroke_from_json(g["stroke"]);
    if (g.contains("m_hand")) b.m_hand = number_of<double>(g["m_hand"], "m_hand");
    if (g.contains("alpha")) b.alpha = number_of<double>(g["alpha"], "alpha");
    out.push_back(std::move(b));
  }
  return out;
}

std::string gestures_to_json(const std::vector<GestureBinding>& gestures) {
  json arr = json::array();
  for (const auto& g : gestures) {
    json e{{"object", g.object_id}, {"stroke", stroke_to_json(g.stroke)}};
    if (g.m_hand) e["m_hand"] = *g.m_hand;
    if (g.alpha) e["alpha"] = *g.alpha;
    arr.push_back(std::move(e));
  }
  return json{{"gestures", arr}}.dump() + "\n";
}

Inputs load_inputs(const PipelineConfig& config) {
  if (config.canvas_path.empty()) throw Error(ErrorCode::InvalidConfig, "no canvas file given");
  Inputs in;
  in.canvas = parse_canvas(read_file(config.canvas_path));
  if (config.gestures_path) in.gestures = parse_gestures(read_file(*config.gestures_path));
  if (config.material_table_path) in.table = recognition::MaterialTable::load(*config.material_table_path);
  if (config.exemplars_path) in.exemplars = recognition::load_exemplars(*config.exemplars_path);
  return in;
}

// ---- scene assembly -------------------------------------------------------

Vec3 canvas_to_world(const Vec2& p) { return Vec3(p.x(), 0.0, p.y()); }

Vec3 canvas_velocity_to_world(const Vec3& v) { return Vec3(v.x(), 0.0, v.y()); }

TransferResult transfer_gesture(const trajectory::Stroke& stroke, double m_obj,
                                const recognition::MaterialProfile& profile, const Settings& settings,
                                std::optional<double> m_hand, std::optional<double> alpha) {
  TransferResult r;
  const auto samples = trajectory::estimate_kinematics(stroke);
  r.summary = trajectory::summarize_gesture(samples, settings.release_window);
  Vec3 v_canvas = Vec3::Zero();
  switch (settings.velocity_source) {
    case VelocitySource::Release: v_canvas = r.summary.release_velocity; break;
    case VelocitySource::Mean: v_canvas = r.summary.principal_direction * r.summary.mean_speed; break;
    case VelocitySource::Peak: v_canvas = r.summary.principal_direction * r.summary.peak_speed; break;
  }
  r.v_hand = canvas_velocity_to_world(v_canvas);
  r.m_hand = m_hand.value_or(settings.m_hand);
  r.m_obj = m_obj;
  r.alpha = alpha.value_or(profile.alpha_material);
  r.v_obj = recognition::transfer_velocity({r.v_hand, r.m_hand, r.m_obj, r.alpha});
  return r;
}

BuiltScene build_scene(const Inputs& inputs, const Settings& settings,
                       const recognition::EndpointConfig& endpoint) {
  validate(settings);
  sketch::SketchCanvas canvas = inputs.canvas;
  if (settings.beautify_epsilon > 0.0) {
    for (auto& s : canvas.strokes) s = sketch::beautify_stroke(s, settings.beautify_epsilon);
  }

  BuiltScene built;
  auto& env = built.scene.environment;
  env.dt = settings.dt;
  env.solver_iterations = settings.solver_iterations;
  env.duration = settings.duration;
  env.fps = settings.fps;
  env.ground = settings.ground;

  const bool remote = settings.backend == Backend::Remote ||
                      (settings.backend == Backend::Auto && !endpoint.url.empty());
  std::vector<sketch::SketchObject> objects;
  if (!canvas.strokes.empty()) {
    objects = sketch::segment_objects(canvas, settings.temporal_gap, settings.spatial_gap_fraction);
  }
  for (const auto& obj : objects) {
    ObjectReport report;
    report.id = obj.id;
    recognition::MaterialProfile profile;
    std::optional<double> remote_mass;
    if (remote) {
      recognition::InferenceExchange exchange;
      exchange.request.descriptors = obj.descriptors;
      exchange.request.prompt = settings.prompt;
      exchange.request.exemplars = inputs.exemplars;
      const auto inference = recognition::infer_material_remote(exchange, endpoint, obj, inputs.table);
      profile = inference.profile;
      remote_mass = inference.remote_mass_kg;
      report.provenance = inference.provenance;
      report.confidence = inference.confidence;
      report.diagnostic = inference.diagnostic;
    } else {
      profile = recognition::infer_material_rule_based(obj, settings.prompt, inputs.table);
    }
    scene::SceneObject o = make_object(obj, profile, settings);
    if (remote_mass) {
      o.mass.mass_kg = *remote_mass;
      o.mass.provenance = recognition::Provenance::RemoteInference;
    }
    built.scene.objects.push_back(std::move(o));
    built.reports.push_back(std::move(report));
  }

  for (const auto& g : inputs.gestures) {
    auto it = std::find_if(built.scene.objects.begin(), built.scene.objects.end(),
                           [&](const auto& o) { return o.id == g.object_id; });
    if (it == built.scene.objects.end()) throw Error(ErrorCode::UnknownObject, g.object_id);
    const TransferResult t = transfer_gesture(g.stroke, it->mass.mass_kg, it->profile, settings, g.m_hand, g.alpha);
    it->velocity = t.v_obj;
    it->gesture = scene::GestureRecord{t.v_hand, t.m_hand, t.alpha};
  }
  for (auto& o : built.scene.objects) scene::quantize_properties(o);

  built.scene.metadata.generator = "sketchplay-emitter 0.1.0";
  built.scene.metadata.input_hashes = {
      {"canvas", sha256_hex(canvas_to_json(inputs.canvas))},
      {"gestures", sha256_hex(gestures_to_json(inputs.gestures))},
      {"materials", sha256_hex(inputs.table.to_json_text())},
      {"settings", sha256_hex(settings_to_json(settings))},
  };
  scene::validate(built.scene);
  return built;
}

// ---- artifacts -------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> render_prior_files(const scene::Scene& sc,
                                                                   const physics::Frame& initial,
                                                                   const std::vector<physics::Frame>& frames,
                                                                   const Settings& settings) {
  const auto bodies = priors::render_bodies(sc);
  Vec3 center;
  double radius;
  scene::bounding_sphere(sc, &center, &radius);
  const priors::Camera camera = priors::default_camera(center, radius, settings.prior_width, settings.prior_height);
  priors::RenderOptions options;
  if (settings.prior_ground && sc.environment.ground) options.ground = physics::Plane{};
  std::vector<std::pair<std::string, std::string>> files;
  const auto stride = static_cast<std::size_t>(settings.prior_stride);
  for (std::size_t k = 0; k * stride <= frames.size(); ++k) {
    const physics::Frame& f = k == 0 ? initial : frames[k * stride - 1];
    const auto depth = priors::render_depth(f, bodies, camera, options);
    const auto edges = priors::render_edges(depth, settings.edge_threshold);
    files.emplace_back(priors::depth_file_name(static_cast<int>(k)), priors::encode_depth_pgm(depth));
    files.emplace_back(priors::edge_file_name(static_cast<int>(k)), priors::encode_edge_pgm(edges));
  }
  return files;
}

Artifacts produce_artifacts(const BuiltScene& built, const Settings& settings) {
  const scene::Scene& sc = built.scene;
  Artifacts out;
  out.scene_json = scene::to_json_text(sc);
  out.script = emitter::emit_script(sc).text;

  physics::World world = scene::build_world(sc);
  const physics::Frame initial = physics::snapshot(world);
  const std::vector<physics::Frame> frames = physics::simulate(world, sc.environment.duration);
  out.frame_count = frames.size();
  out.frame_log = physics::encode_frame_log(world.dt, static_cast<std::uint32_t>(world.body_count()), frames);

  out.priors = render_prior_files(sc, initial, frames, settings);

  json objects = json::array();
  for (const auto* o : scene::sorted_objects(sc)) {
    json e{{"id", o->id},
           {"kind", std::string(scene::to_string(o->kind))},
           {"material", std::string(recognition::to_string(o->profile.label))},
           {"mass_kg", o->mass.mass_kg},
           {"mass_provenance", std::string(recognition::to_string(o->mass.provenance))},
           {"v_obj", vec_json(o->velocity)}};
    if (o->gesture) e["v_hand"] = vec_json(o->gesture->v_hand);
    for (const auto& r : built.reports) {
      if (r.id != o->id) continue;
      e["provenance"] = std::string(recognition::to_string(r.provenance));
      e["confidence"] = r.confidence;
      if (!r.diagnostic.empty()) e["diagnostic"] = r.diagnostic;
    }
    objects.push_back(std::move(e));
  }
  json body_order = scene::body_order(sc);
  out.report_json = json{{"objects", objects},
                         {"body_order", body_order},
                         {"dt", sc.environment.dt},
                         {"duration", sc.environment.duration},
                         {"frame_count", frames.size()},
                         {"prior_frames", out.priors.size() / 2},
                         {"input_hashes", sc.metadata.input_hashes}}
                        .dump(2) +
                    "\n";
  return out;
}

void write_artifacts(const Artifacts& a, const std::string& output_dir) {
  const fs::path dir(output_dir);
  const fs::path priors_dir = dir / "priors";
  std::error_code ec;
  fs::create_directories(priors_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + priors_dir.string() + ": " + ec.message());
  // Stale maps from a longer earlier run would survive otherwise.
  for (const auto& entry : fs::directory_iterator(priors_dir)) {
    const std::string name = entry.path().filename().string();
    if ((name.rfind("depth_", 0) == 0 || name.rfind("edge_", 0) == 0) && entry.path().extension() == ".pgm") {
      fs::remove(entry.path());
    }
  }
  write_file(dir / "scene.json", a.scene_json);
  write_file(dir / "frames.spf", a.frame_log);
  write_file(dir / "scene_script.py", a.script);
  write_file(dir / "report.json", a.report_json);
  for (const auto& [name, bytes] : a.priors) write_file(priors_dir / name, bytes);
}

int run(const PipelineConfig& config, std::ostream& log) {
  try {
    validate(config.settings);
    const Inputs inputs = load_inputs(config);
    const BuiltScene built = build_scene(inputs, config.settings, recognition::EndpointConfig::from_environment());
    const Artifacts artifacts = produce_artifacts(built, config.settings);
    write_artifacts(artifacts, config.output_dir);
    for (const auto& r : built.reports) {
      if (!r.diagnostic.empty()) log << "note: " << r.id << " used rule-based inference (" << r.diagnostic << ")\n";
    }
    log << "wrote " << built.scene.objects.size() << " objects, " << artifacts.frame_count << " frames, "
        << artifacts.priors.size() / 2 << " prior frames to " << config.output_dir << "\n";
    return kExitOk;
  } catch (const NumericalBlowup& e) {
    log << "error: " << e.what() << "\n";
    return kExitBlowup;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string make_tar(const std::vector<std::pair<std::string, std::string>>& files) {
  std::string out;
  for (const auto& [name, data] : files) {
    if (name.size() > 99) throw Error(ErrorCode::ParameterOutOfRange, "tar member name too long: " + name);
    char header[512] = {};
    std::memcpy(header, name.data(), name.size());
    tar_octal(header + 100, 8, 0644);
    tar_octal(header + 108, 8, 0);
    tar_octal(header + 116, 8, 0);
    tar_octal(header + 124, 12, data.size());
    tar_octal(header + 136, 12, 0);
    header[156] = '0';
    std::memcpy(header + 257, "ustar", 6);
    std::memcpy(header + 263, "00", 2);
    std::memset(header + 148, ' ', 8);
    unsigned sum = 0;
    for (unsigned char c : header) sum += c;
    std::snprintf(header + 148, 8, "%06o", sum);
    header[155] = ' ';
    out.append(header, sizeof header);
    out += data;
    out.append((512 - data.size() % 512) % 512, '\0');
  }
  out.append(1024, '\0');
  return out;
}

}  // namespace sketchplay::pipeline
