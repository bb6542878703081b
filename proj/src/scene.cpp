#include "sketchplay/scene.hpp"

#include "sketchplay/sketch.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sketchplay::scene {

namespace {

using nlohmann::json;
using recognition::MaterialProfile;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw Error(ErrorCode::InvalidConfig, std::string("missing numeric field \"") + key + "\"");
  }
  return it->get<double>();
}

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? number(j, key) : fallback;
}

Vec3 read_vec(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != 3) {
    throw Error(ErrorCode::InvalidConfig, std::string("\"") + key + "\" must be a 3-vector");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!(*it)[i].is_number()) throw Error(ErrorCode::InvalidConfig, std::string(key) + " not numeric");
    v[i] = (*it)[i].get<double>();
  }
  return v;
}

Vec3 read_vec_or(const json& j, const char* key, const Vec3& fallback) {
  return j.contains(key) ? read_vec(j, key) : fallback;
}

json shape_to_json(const physics::Shape& shape) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, physics::Sphere>) {
          return json{{"type", "sphere"}, {"radius", s.radius}};
        } else if constexpr (std::is_same_v<T, physics::Box>) {
          return json{{"type", "box"}, {"half_extents", vec(s.half_extents)}};
        } else {
          json outline = json::array();
          for (const auto& p : s.outline) outline.push_back(json::array({p.x(), p.y()}));
          return json{{"type", "prism"}, {"outline", outline}, {"thickness", s.thickness}};
        }
      },
      shape);
}

// Prism outlines are recentered on their area centroid; the removed offset
// is returned in the body's local frame.
physics::Shape shape_from_json(const json& j, Vec3* local_offset) {
  *local_offset = Vec3::Zero();
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw Error(ErrorCode::InvalidConfig, "shape needs a \"type\"");
  }
  const std::string type = j["type"];
  if (type == "sphere") return physics::Sphere{number(j, "radius")};
  if (type == "box") return physics::Box{read_vec(j, "half_extents")};
  if (type == "prism") {
    physics::ConvexPrism prism;
    prism.thickness = number(j, "thickness");
    if (!j.contains("outline") || !j["outline"].is_array()) {
      throw Error(ErrorCode::InvalidConfig, "prism needs an \"outline\"");
    }
    for (const auto& p : j["outline"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw Error(ErrorCode::InvalidConfig, "outline points are [x, y] pairs");
      }
      prism.outline.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    if (prism.outline.size() < 3) throw Error(ErrorCode::DegenerateOutline, "prism outline < 3 points");
    // An outline written by to_json_text is already centered; shifting it
    // again by a rounding-level centroid would break byte-exact round trips.
    std::vector<Vec2> centered = prism.outline;
    const Vec2 c = physics::center_outline(centered);
    double extent = 0.0;
    for (const auto& p : prism.outline) extent = std::max(extent, p.cwiseAbs().maxCoeff());
    if (c.norm() > 1e-12 * extent) {
      prism.outline = std::move(centered);
      *local_offset = Vec3(c.x(), c.y(), 0.0);
    } else if (sketch::polygon_area(prism.outline) < 0.0) {
      std::reverse(prism.outline.begin(), prism.outline.end());
    }
    return prism;
  }
  throw Error(ErrorCode::UnsupportedShape, "unknown shape type \"" + type + "\"");
}

json profile_to_json(const MaterialProfile& p) {
  return json{{"alpha_material", p.alpha_material}, {"density_rho", p.density_rho},
              {"friction_mu", p.friction_mu},       {"restitution_e", p.restitution_e},
              {"elastic_modulus_E", p.elastic_modulus_E}, {"poisson_nu", p.poisson_nu}};
}

void overlay_profile(const json& j, MaterialProfile& p) {
  p.alpha_material = number_or(j, "alpha_material", p.alpha_material);
  p.density_rho = number_or(j, "density_rho", p.density_rho);
  p.friction_mu = number_or(j, "friction_mu", p.friction_mu);
  p.restitution_e = number_or(j, "restitution_e", p.restitution_e);
  p.elastic_modulus_E = number_or(j, "elastic_modulus_E", p.elastic_modulus_E);
  p.poisson_nu = number_or(j, "poisson_nu", p.poisson_nu);
}

recognition::Provenance provenance_from_string(const std::string& s) {
  for (auto p : {recognition::Provenance::RuleBased, recognition::Provenance::RemoteInference,
                 recognition::Provenance::UserOverride}) {
    if (recognition::to_string(p) == s) return p;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown mass provenance \"" + s + "\"");
}

double object_volume(const SceneObject& o) {
  if (o.kind == BodyKind::Cloth) {
    return (o.cloth.rows - 1) * (o.cloth.cols - 1) * o.cloth.spacing * o.cloth.spacing *
           o.cloth.thickness;
  }
  return physics::volume(o.shape);
}

double object_radius(const SceneObject& o) {
  if (o.kind == BodyKind::Cloth) {
    const double w = (o.cloth.cols - 1) * o.cloth.spacing, h = (o.cloth.rows - 1) * o.cloth.spacing;
    return 0.5 * std::hypot(w, h);
  }
  return physics::bounding_radius(o.shape);
}

void check_shape(const SceneObject& o) {
  const std::string& id = o.id;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, physics::Sphere>) {
          if (!(s.radius > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, id + ": radius <= 0");
        } else if constexpr (std::is_same_v<T, physics::Box>) {
          if (!(s.half_extents.minCoeff() > 0.0)) {
            throw Error(ErrorCode::ParameterOutOfRange, id + ": box half extents must be > 0");
          }
        } else {
          if (!(s.thickness > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, id + ": thickness <= 0");
          if (s.outline.size() < 3 || sketch::polygon_area(s.outline) < sketch::kMinOutlineArea) {
            throw Error(ErrorCode::DegenerateOutline, id + ": prism outline has no area");
          }
        }
      },
      o.shape);
}

}  // namespace

std::string_view to_string(BodyKind kind) {
  switch (kind) {
    case BodyKind::Rigid: return "rigid";
    case BodyKind::Soft: return "soft";
    case BodyKind::Cloth: return "cloth";
  }
  return "rigid";
}

std::optional<BodyKind> body_kind_from_string(std::string_view name) {
  for (auto k : {BodyKind::Rigid, BodyKind::Soft, BodyKind::Cloth})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

int Environment::frame_count() const {
  return static_cast<int>(std::floor(duration * fps + 1e-9)) + 1;
}

double quantize9(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
  double out = value;
  std::from_chars(buf, res.ptr, out);
  return out;
}

void quantize_properties(SceneObject& o) {
  auto& p = o.profile;
  for (double* v : {&p.alpha_material, &p.density_rho, &p.friction_mu, &p.restitution_e,
                    &p.elastic_modulus_E, &p.poisson_nu, &o.mass.mass_kg, &o.mass.volume_m3}) {
    *v = quantize9(*v);
  }
  for (int i = 0; i < 3; ++i) o.velocity[i] = quantize9(o.velocity[i]);
}

void validate(const Scene& scene) {
  const auto& env = scene.environment;
  if (!(env.dt > 0.0 && env.dt <= 1.0 / 60.0 + 1e-15)) {
    throw Error(ErrorCode::ParameterOutOfRange, "dt must be in (0, 1/60]");
  }
  if (env.solver_iterations < 1) throw Error(ErrorCode::ParameterOutOfRange, "solver_iterations < 1");
  if (!(env.fps > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "fps must be positive");
  if (!(env.duration > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "duration must be positive");
  if (!env.gravity.allFinite()) throw Error(ErrorCode::ParameterOutOfRange, "gravity not finite");

  std::set<std::string> ids;
  for (const auto& o : scene.objects) {
    if (o.id.empty()) throw Error(ErrorCode::InvalidConfig, "object id is empty");
    if (!ids.insert(o.id).second) throw Error(ErrorCode::InvalidConfig, "duplicate object id " + o.id);
    recognition::validate_profile(o.profile);
    if (!(o.mass.mass_kg > 0.0) || !std::isfinite(o.mass.mass_kg)) {
      throw Error(ErrorCode::NonPositiveMass, o.id + ": mass must be positive");
    }
    if (!o.position.allFinite() || !o.velocity.allFinite()) {
      throw Error(ErrorCode::ParameterOutOfRange, o.id + ": pose or velocity not finite");
    }
    if (o.kind == BodyKind::Cloth) {
      const auto& c = o.cloth;
      if (c.rows < 2 || c.cols < 2 || !(c.spacing > 0.0) || !(c.thickness > 0.0)) {
        throw Error(ErrorCode::ParameterOutOfRange, o.id + ": invalid cloth grid");
      }
      for (const auto& [r, col] : c.pinned) {
        if (r < 0 || col < 0 || r >= c.rows || col >= c.cols) {
          throw Error(ErrorCode::IndexOutOfRange, o.id + ": pinned node outside the grid");
        }
      }
    } else {
      check_shape(o);
      if (o.kind == BodyKind::Soft) {
        if (std::holds_alternative<physics::Sphere>(o.shape)) {
          throw Error(ErrorCode::UnsupportedShape, o.id + ": soft bodies need a box or prism");
        }
        if (!(o.lattice_spacing > 0.0)) {
          throw Error(ErrorCode::ParameterOutOfRange, o.id + ": lattice spacing must be positive");
        }
      }
    }
  }
}

std::vector<const SceneObject*> sorted_objects(const Scene& scene) {
  std::vector<const SceneObject*> out;
  for (const auto& o : scene.objects) out.push_back(&o);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

std::vector<std::string> body_order(const Scene& scene) {
  std::vector<std::string> out;
  const auto sorted = sorted_objects(scene);
  for (BodyKind kind : {BodyKind::Rigid, BodyKind::Soft, BodyKind::Cloth})
    for (const auto* o : sorted)
      if (o->kind == kind) out.push_back(o->id);
  return out;
}

physics::World build_world(const Scene& scene) {
  validate(scene);
  physics::World world;
  const auto& env = scene.environment;
  world.gravity = env.gravity;
  world.dt = env.dt;
  world.solver_iterations = env.solver_iterations;
  if (!env.ground) world.ground.reset();

  for (const auto* o : sorted_objects(scene)) {
    const auto& p = o->profile;
    physics::ElasticParameters elastic{p.density_rho, p.elastic_modulus_E, p.poisson_nu,
                                       p.friction_mu, p.restitution_e};
    switch (o->kind) {
      case BodyKind::Rigid: {
        auto body = physics::RigidBody::make(o->id, o->shape, o->mass.mass_kg, o->position,
                                             o->orientation);
        body.friction = p.friction_mu;
        body.restitution = p.restitution_e;
        body.is_static = o->is_static;
        body.linear_velocity = o->is_static ? Vec3::Zero() : o->velocity;
        world.rigid_bodies.push_back(std::move(body));
        break;
      }
      case BodyKind::Soft: {
        auto body = physics::make_soft_body(o->id, o->shape, o->position, o->orientation,
                                            o->lattice_spacing, elastic);
        for (auto& n : body.nodes) n.velocity = o->velocity;
        world.soft_bodies.push_back(std::move(body));
        break;
      }
      case BodyKind::Cloth: {
        const auto& g = o->cloth;
        const Mat3 r = o->orientation.normalized().toRotationMatrix();
        const double w = (g.cols - 1) * g.spacing, h = (g.rows - 1) * g.spacing;
        const Vec3 origin = o->position + r * Vec3(-0.5 * w, 0.5 * h, 0.0);
        auto cloth = physics::make_cloth(o->id, g.rows, g.cols, g.spacing, origin, r.col(0),
                                         -r.col(1), g.thickness, elastic, g.pinned);
        for (auto& n : cloth.nodes)
          if (!n.pinned) n.velocity = o->velocity;
        world.cloths.push_back(std::move(cloth));
        break;
      }
    }
  }
  return world;
}

std::string to_json_text(const Scene& scene) {
  const auto& env = scene.environment;
  json objects = json::array();
  for (const auto* o : sorted_objects(scene)) {
    json j{{"id", o->id}, {"kind", std::string(to_string(o->kind))}};
    if (o->kind == BodyKind::Cloth) {
      json pinned = json::array();
      for (const auto& [r, c] : o->cloth.pinned) pinned.push_back(json::array({r, c}));
      j["cloth"] = json{{"rows", o->cloth.rows},
                        {"cols", o->cloth.cols},
                        {"spacing", o->cloth.spacing},
                        {"thickness", o->cloth.thickness},
                        {"pinned", pinned}};
    } else {
      j["shape"] = shape_to_json(o->shape);
    }
    if (o->kind == BodyKind::Soft) j["lattice_spacing"] = o->lattice_spacing;
    j["position"] = vec(o->position);
    j["orientation"] = json::array(
        {o->orientation.w(), o->orientation.x(), o->orientation.y(), o->orientation.z()});
    j["material"] = std::string(recognition::to_string(o->profile.label));
    j["profile"] = profile_to_json(o->profile);
    j["mass_kg"] = o->mass.mass_kg;
    j["volume_m3"] = o->mass.volume_m3;
    j["mass_provenance"] = std::string(recognition::to_string(o->mass.provenance));
    j["velocity"] = vec(o->velocity);
    if (o->gesture) {
      j["gesture"] = json{{"v_hand", vec(o->gesture->v_hand)},
                          {"m_hand", o->gesture->m_hand},
                          {"alpha_material", o->gesture->alpha_material}};
    }
    j["static"] = o->is_static;
    objects.push_back(std::move(j));
  }
  json out{{"environment",
            {{"gravity", vec(env.gravity)},
             {"ground", env.ground},
             {"dt", env.dt},
             {"solver_iterations", env.solver_iterations},
             {"fps", env.fps},
             {"duration", env.duration}}},
           {"objects", objects}};
  if (!scene.metadata.generator.empty() || !scene.metadata.input_hashes.empty()) {
    out["metadata"] = json{{"generator", scene.metadata.generator},
                           {"input_hashes", scene.metadata.input_hashes}};
  }
  return out.dump(2) + "\n";
}

Scene from_json_text(const std::string& text, const recognition::MaterialTable& table) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("scene JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::InvalidConfig, "scene JSON must be an object");

  Scene scene;
  if (root.contains("environment")) {
    const json& e = root["environment"];
    auto& env = scene.environment;
    env.gravity = read_vec_or(e, "gravity", env.gravity);
    if (e.contains("ground")) env.ground = e["ground"].get<bool>();
    env.dt = number_or(e, "dt", env.dt);
    env.solver_iterations = static_cast<int>(number_or(e, "solver_iterations", env.solver_iterations));
    env.fps = number_or(e, "fps", env.fps);
    env.duration = number_or(e, "duration", env.duration);
  }
  if (root.contains("metadata")) {
    const json& m = root["metadata"];
    scene.metadata.generator = m.value("generator", "");
    if (m.contains("input_hashes")) {
      scene.metadata.input_hashes = m["input_hashes"].get<std::map<std::string, std::string>>();
    }
  }

  for (const json& j : root.value("objects", json::array())) {
    SceneObject o;
    if (!j.contains("id") || !j["id"].is_string()) throw Error(ErrorCode::InvalidConfig, "object id missing");
    o.id = j["id"];
    const std::string kind = j.value("kind", "rigid");
    const auto k = body_kind_from_string(kind);
    if (!k) throw Error(ErrorCode::InvalidConfig, o.id + ": unknown kind \"" + kind + "\"");
    o.kind = *k;
    o.position = read_vec_or(j, "position", Vec3::Zero());
    if (j.contains("orientation")) {
      const json& q = j["orientation"];
      if (!q.is_array() || q.size() != 4) throw Error(ErrorCode::InvalidConfig, o.id + ": orientation is [w,x,y,z]");
      o.orientation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
      if (!(o.orientation.norm() > 0.0)) throw Error(ErrorCode::InvalidConfig, o.id + ": zero quaternion");
      o.orientation.normalize();
    }
    if (o.kind == BodyKind::Cloth) {
      if (!j.contains("cloth")) throw Error(ErrorCode::InvalidConfig, o.id + ": cloth needs a \"cloth\" grid");
      const json& c = j["cloth"];
      o.cloth.rows = static_cast<int>(number(c, "rows"));
      o.cloth.cols = static_cast<int>(number(c, "cols"));
      o.cloth.spacing = number(c, "spacing");
      o.cloth.thickness = number_or(c, "thickness", o.cloth.thickness);
      for (const json& p : c.value("pinned", json::array())) {
        if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::InvalidConfig, o.id + ": pinned entries are [row, col]");
        o.cloth.pinned.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
    } else {
      if (!j.contains("shape")) throw Error(ErrorCode::InvalidConfig, o.id + ": missing shape");
      Vec3 offset;
      o.shape = shape_from_json(j["shape"], &offset);
      o.position += o.orientation * offset;
    }
    o.lattice_spacing = number_or(j, "lattice_spacing", o.lattice_spacing);

    const std::string material = j.value("material", "wood");
    const auto label = recognition::material_from_string(material);
    if (!label) throw Error(ErrorCode::InvalidConfig, o.id + ": unknown material \"" + material + "\"");
    if (*label != recognition::Material::Unknown) o.profile = table.at(*label);
    o.profile.label = *label;
    if (j.contains("profile")) overlay_profile(j["profile"], o.profile);

    o.mass.volume_m3 = object_volume(o);
    if (j.contains("mass_kg")) {
      o.mass.mass_kg = number(j, "mass_kg");
      o.mass.provenance = provenance_from_string(j.value("mass_provenance", "user_override"));
    } else {
      o.mass.mass_kg = o.profile.density_rho * o.mass.volume_m3;
      o.mass.provenance = recognition::Provenance::RuleBased;
    }
    o.velocity = read_vec_or(j, "velocity", Vec3::Zero());
    if (j.contains("gesture")) {
      const json& g = j["gesture"];
      o.gesture = GestureRecord{read_vec(g, "v_hand"), number(g, "m_hand"), number(g, "alpha_material")};
    }
    o.is_static = j.value("static", false);
    scene.objects.push_back(std::move(o));
  }
  validate(scene);
  return scene;
}

Scene load(const std::string& path, const recognition::MaterialTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scene file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), table);
}

void bounding_sphere(const Scene& scene, Vec3* center, double* radius) {
  if (scene.objects.empty()) {
    *center = Vec3::Zero();
    *radius = 1.0;
    return;
  }
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const auto& o : scene.objects) {
    const double r = object_radius(o);
    lo = lo.cwiseMin(o.position - Vec3::Constant(r));
    hi = hi.cwiseMax(o.position + Vec3::Constant(r));
  }
  *center = 0.5 * (lo + hi);
  *radius = std::max(0.5 * (hi - lo).norm(), 0.05);
}

}  // namespace sketchplay::scene
