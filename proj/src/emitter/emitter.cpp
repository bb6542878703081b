#include "sketchplay/emitter/emitter.hpp"

#include "sketchplay/emitter/blender_api.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace sketchplay::emitter {

namespace bl = blender;

namespace {

using scene::BodyKind;
using scene::SceneObject;

std::string tuple(const Vec3& v) {
  return "(" + format_number(v.x()) + ", " + format_number(v.y()) + ", " + format_number(v.z()) + ")";
}

std::string quoted(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

Vec3 material_color(recognition::Material m) {
  switch (m) {
    case recognition::Material::Metal: return Vec3(0.56, 0.57, 0.58);
    case recognition::Material::Wood: return Vec3(0.52, 0.37, 0.26);
    case recognition::Material::Rubber: return Vec3(0.8, 0.9, 0.2);
    case recognition::Material::Glass: return Vec3(0.7, 0.85, 0.9);
    case recognition::Material::Cloth: return Vec3(0.75, 0.2, 0.25);
    case recognition::Material::Unknown: return Vec3(0.6, 0.6, 0.6);
  }
  return Vec3(0.6, 0.6, 0.6);
}

double min_extent(const SceneObject& o) {
  if (o.kind == BodyKind::Cloth) return o.cloth.thickness;
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, physics::Sphere>) {
          return 2.0 * s.radius;
        } else if constexpr (std::is_same_v<T, physics::Box>) {
          return 2.0 * s.half_extents.minCoeff();
        } else {
          return s.thickness;
        }
      },
      o.shape);
}

double collision_margin(const SceneObject& o) {
  return scene::quantize9(std::min(bl::kMaxCollisionMargin, 0.05 * min_extent(o)));
}

void mesh_lines(std::ostream& out, const std::string& name, const std::vector<Vec3>& vertices,
                const std::vector<std::vector<int>>& faces) {
  out << "vertices = [\n";
  for (const auto& v : vertices) out << "    " << tuple(v) << ",\n";
  out << "]\nfaces = [\n";
  for (const auto& f : faces) {
    out << "    (";
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? ", " : "") << f[i];
    out << (f.size() == 1 ? ",)" : ")") << ",\n";
  }
  out << "]\nobj = make_mesh(" << quoted(name) << ", vertices, faces)\n";
}

void emit_geometry(std::ostream& out, const SceneObject& o) {
  if (o.kind == BodyKind::Cloth) {
    const auto& g = o.cloth;
    const double w = (g.cols - 1) * g.spacing, h = (g.rows - 1) * g.spacing;
    std::vector<Vec3> vertices;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c)
        vertices.emplace_back(c * g.spacing - 0.5 * w, 0.5 * h - r * g.spacing, 0.0);
    std::vector<std::vector<int>> faces;
    for (int r = 0; r + 1 < g.rows; ++r)
      for (int c = 0; c + 1 < g.cols; ++c) {
        const int a = r * g.cols + c;
        faces.push_back({a, a + g.cols, a + g.cols + 1, a + 1});
      }
    mesh_lines(out, o.id, vertices, faces);
    out << "pin = obj.vertex_groups.new(name=" << quoted(bl::kPinGroup) << ")\n";
    std::vector<int> pinned;
    for (const auto& [r, c] : g.pinned) pinned.push_back(r * g.cols + c);
    std::sort(pinned.begin(), pinned.end());
    out << "pin.add([";
    for (std::size_t i = 0; i < pinned.size(); ++i) out << (i ? ", " : "") << pinned[i];
    out << "], 1.0, \"REPLACE\")\n";
    return;
  }
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, physics::Sphere>) {
          out << "bpy.ops.mesh.primitive_uv_sphere_add(radius=" << format_number(s.radius)
              << ", segments=" << bl::kSphereSegments << ", ring_count=" << bl::kSphereRings << ")\n"
              << "obj = bpy.context.active_object\n"
              << "obj.name = " << quoted(o.id) << "\n";
        } else {
          const physics::Polyhedron poly = physics::make_polyhedron(s);
          mesh_lines(out, o.id, poly.vertices, poly.faces);
        }
      },
      o.shape);
}

void emit_section1(std::ostream& out, const SceneObject& o) {
  emit_geometry(out, o);
  const Quat& q = o.orientation;
  out << "obj.location = " << tuple(o.position) << "\n"
      << "obj.rotation_mode = \"QUATERNION\"\n"
      << "obj.rotation_quaternion = (" << format_number(q.w()) << ", " << format_number(q.x())
      << ", " << format_number(q.y()) << ", " << format_number(q.z()) << ")\n";
  const std::string label(recognition::to_string(o.profile.label));
  const Vec3 rgb = material_color(o.profile.label);
  out << "mat = bpy.data.materials.new(" << quoted(o.id + ":" + label) << ")\n"
      << "mat.diffuse_color = (" << format_number(rgb.x()) << ", " << format_number(rgb.y()) << ", "
      << format_number(rgb.z()) << ", 1)\n"
      << "obj.data.materials.append(mat)\n"
      << "objects[" << quoted(o.id) << "] = obj\n";
}

std::string props_line(const SceneObject& o) {
  const auto& p = o.profile;
  std::string s = "{";
  auto field = [&](std::string_view key, const std::string& value) {
    if (s.size() > 1) s += ", ";
    s += quoted(key) + ": " + value;
  };
  field("mass", format_number(o.mass.mass_kg));
  field("friction", format_number(p.friction_mu));
  field("restitution", format_number(p.restitution_e));
  field("collision_margin", format_number(collision_margin(o)));
  field("material", quoted(recognition::to_string(p.label)));
  field("alpha_material", format_number(p.alpha_material));
  field("density", format_number(p.density_rho));
  field("elastic_modulus_E", format_number(p.elastic_modulus_E));
  field("poisson_nu", format_number(p.poisson_nu));
  if (o.kind == BodyKind::Cloth) field("thickness", format_number(o.cloth.thickness));
  if (o.kind == BodyKind::Soft) field("lattice_spacing", format_number(o.lattice_spacing));
  return s + "}";
}

std::string_view collision_shape(const SceneObject& o) {
  if (std::holds_alternative<physics::Sphere>(o.shape)) return bl::kShapeSphere;
  if (std::holds_alternative<physics::Box>(o.shape)) return bl::kShapeBox;
  return bl::kShapeConvexHull;
}

void emit_section2(std::ostream& out, const SceneObject& o) {
  out << "obj = objects[" << quoted(o.id) << "]\n"
      << bl::kPropsPrefix << props_line(o) << "\n"
      << "for key in (\"alpha_material\", \"density\", \"elastic_modulus_E\", \"poisson_nu\"):\n"
      << "    obj[key] = props[key]\n";
  switch (o.kind) {
    case BodyKind::Rigid:
      out << "select_only(obj)\n"
          << "bpy.ops.rigidbody.object_add(type="
          << quoted(o.is_static ? bl::kRigidPassive : bl::kRigidActive) << ")\n"
          << "obj.rigid_body.mass = props[\"mass\"]\n"
          << "obj.rigid_body.friction = props[\"friction\"]\n"
          << "obj.rigid_body.restitution = props[\"restitution\"]\n"
          << "obj.rigid_body.collision_shape = " << quoted(collision_shape(o)) << "\n"
          << "obj.rigid_body.use_margin = True\n"
          << "obj.rigid_body.collision_margin = props[\"collision_margin\"]\n"
          << "obj.rigid_body.linear_damping = 0.0\n"
          << "obj.rigid_body.angular_damping = 0.0\n";
      break;
    case BodyKind::Soft:
      out << "mod = obj.modifiers.new(\"Softbody\", " << quoted(bl::kSoftBodyModifier) << ")\n"
          << "mod.settings.use_goal = False\n"
          << "mod.settings.mass = props[\"mass\"] / len(obj.data.vertices)\n"
          << "mod.settings.friction = props[\"friction\"]\n"
          << "mod.settings.use_edges = True\n"
          << "mod.settings.pull = 0.9\n"
          << "mod.settings.push = 0.9\n"
          << "mod.settings.ball_size = props[\"collision_margin\"]\n";
      break;
    case BodyKind::Cloth:
      out << "mod = obj.modifiers.new(\"Cloth\", " << quoted(bl::kClothModifier) << ")\n"
          << "mod.settings.mass = props[\"mass\"] / len(obj.data.vertices)\n"
          << "mod.settings.air_damping = 2.0\n"
          << "mod.settings.vertex_group_mass = " << quoted(bl::kPinGroup) << "\n"
          << "mod.collision_settings.friction = props[\"friction\"]\n"
          << "mod.collision_settings.distance_min = props[\"collision_margin\"]\n";
      break;
  }
}

void emit_section3(std::ostream& out, const SceneObject& o) {
  if (o.kind != BodyKind::Rigid) {
    out << "# " << scene::to_string(o.kind) << " bodies start at rest in Blender; the simulated"
        << " initial velocity was " << tuple(o.velocity) << "\n";
    return;
  }
  if (o.is_static || o.velocity.isZero(0.0)) {
    out << "# at rest\n";
    return;
  }
  out << "launch(objects[" << quoted(o.id) << "], " << tuple(o.velocity) << ")\n";
}

constexpr std::string_view kPreamble = R"(import bpy
from mathutils import Vector

scene = bpy.context.scene
bpy.ops.object.select_all(action="SELECT")
bpy.ops.object.delete(use_global=False)
for mesh in list(bpy.data.meshes):
    bpy.data.meshes.remove(mesh)
for material in list(bpy.data.materials):
    bpy.data.materials.remove(material)
if scene.rigidbody_world is None:
    bpy.ops.rigidbody.world_add()
objects = {}


def make_mesh(name, vertices, faces):
    mesh = bpy.data.meshes.new(name)
    mesh.from_pydata(vertices, [], faces)
    mesh.update()
    obj = bpy.data.objects.new(name, mesh)
    scene.collection.objects.link(obj)
    return obj


def select_only(obj):
    bpy.ops.object.select_all(action="DESELECT")
    obj.select_set(True)
    bpy.context.view_layer.objects.active = obj


def launch(obj, velocity):
    # Kinematic handoff: animate one frame at the target velocity, then let
    # the rigid body solver take over with the velocity it inherited.
    start = obj.location.copy()
    obj.rigid_body.kinematic = True
    obj.keyframe_insert("location", frame=1)
    obj.rigid_body.keyframe_insert("kinematic", frame=1)
    obj.location = start + Vector(velocity) / scene.render.fps
    obj.keyframe_insert("location", frame=2)
    obj.rigid_body.kinematic = False
    obj.rigid_body.keyframe_insert("kinematic", frame=2)
    obj.location = start

)";

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  if (!std::isfinite(value)) throw Error(ErrorCode::ParameterOutOfRange, "non-finite number in script");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

SceneScript emit_script(const SceneSpec& spec) {
  const auto& env = spec.environment;
  if (!(env.duration > 0.0) || !(env.fps > 0.0) || env.frame_count() < 1) {
    throw Error(ErrorCode::EmptySpec, "environment yields no frames");
  }
  for (const auto& o : spec.objects) {
    if (o.kind == BodyKind::Soft && std::holds_alternative<physics::Sphere>(o.shape)) {
      throw Error(ErrorCode::UnsupportedShape, o.id + ": soft spheres are not supported");
    }
  }
  scene::validate(spec);
  const auto objects = scene::sorted_objects(spec);
  const int frames = env.frame_count();
  const int substeps = std::max(1, static_cast<int>(std::lround(1.0 / (env.dt * env.fps))));

  std::ostringstream out;
  out << "# Scene script generated by " << bl::kGenerator << " for the Blender " << bl::kApiLevel
      << " Python API.\n"
      << "# Run with: blender --background --python <this file>\n"
      << kPreamble;
  if (env.ground) {
    out << "bpy.ops.mesh.primitive_plane_add(size=" << format_number(bl::kGroundSize)
        << ", location=(0, 0, 0))\n"
        << "ground = bpy.context.active_object\n"
        << "ground.name = \"ground\"\n"
        << "bpy.ops.rigidbody.object_add(type=" << quoted(bl::kRigidPassive) << ")\n"
        << "ground.rigid_body.friction = 0.5\n"
        << "ground.rigid_body.restitution = 0\n"
        << "ground.modifiers.new(\"Collision\", " << quoted(bl::kCollisionModifier) << ")\n";
  }

  SceneScript script;
  auto section = [&](int i) {
    out << "\n";
    script.sections[i] = static_cast<std::size_t>(out.tellp());
    out << bl::kSectionHeaders[i] << "\n";
  };

  section(0);
  for (const auto* o : objects) {
    out << bl::kObjectMarker << o->id << "\n";
    emit_section1(out, *o);
  }

  section(1);
  for (const auto* o : objects) {
    out << bl::kObjectMarker << o->id << "\n";
    emit_section2(out, *o);
  }

  section(2);
  out << "scene.use_gravity = True\n"
      << "scene.gravity = " << tuple(env.gravity) << "\n"
      << "scene.render.fps = " << format_number(env.fps) << "\n"
      << "scene.frame_start = 1\n"
      << "scene.frame_end = " << frames << "\n"
      << "scene.rigidbody_world.point_cache.frame_start = 1\n"
      << "scene.rigidbody_world.point_cache.frame_end = " << frames << "\n"
      << "scene.rigidbody_world.substeps_per_frame = " << substeps << "\n"
      << "scene.rigidbody_world.solver_iterations = " << env.solver_iterations << "\n";
  for (const auto* o : objects) {
    out << bl::kObjectMarker << o->id << "\n";
    emit_section3(out, *o);
  }
  out << "scene.frame_set(1)\n";

  out << "\n" << bl::kProvenanceHeader << "\n"
      << "# generator: " << (spec.metadata.generator.empty() ? std::string(bl::kGenerator)
                                                             : spec.metadata.generator)
      << "\n";
  for (const auto& [name, hash] : spec.metadata.input_hashes) {
    out << "# input " << name << " sha256 " << hash << "\n";
  }
  script.text = out.str();
  return script;
}

namespace {

// Bracket and quote balance for the Python subset the emitter produces:
// single- and double-quoted strings with backslash escapes, '#' comments.
void check_syntax(const std::string& text, std::vector<Violation>& out) {
  std::vector<std::pair<char, std::size_t>> stack;
  std::size_t line = 1;
  char quote = 0;
  bool comment = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      if (quote) {
        out.push_back({ViolationKind::Syntax, "unterminated string on line " + std::to_string(line)});
        quote = 0;
      }
      comment = false;
      ++line;
      continue;
    }
    if (comment) continue;
    if (quote) {
      if (c == '\\') ++i;
      else if (c == quote) quote = 0;
      continue;
    }
    switch (c) {
      case '#': comment = true; break;
      case '"':
      case '\'': quote = c; break;
      case '(':
      case '[':
      case '{': stack.emplace_back(c, line); break;
      case ')':
      case ']':
      case '}': {
        const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
        if (stack.empty() || stack.back().first != open) {
          out.push_back({ViolationKind::Syntax,
                         std::string("unmatched '") + c + "' on line " + std::to_string(line)});
        } else {
          stack.pop_back();
        }
        break;
      }
      default: break;
    }
  }
  if (quote) out.push_back({ViolationKind::Syntax, "unterminated string at end of file"});
  for (const auto& [c, l] : stack) {
    out.push_back({ViolationKind::Syntax, std::string("unclosed '") + c + "' from line " + std::to_string(l)});
  }
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

// Object markers per section; index 0..2 are the sections in file order of
// their headers, keyed by header number.
struct SectionScan {
  std::vector<int> header_order;                    // header numbers as they appear
  std::array<std::vector<std::string>, 3> markers;  // by header number
  std::array<std::vector<std::string>, 3> section_lines;
};

SectionScan scan_sections(const std::string& text) {
  SectionScan scan;
  int current = -1;
  for (const auto& l : lines_of(text)) {
    bool header = false;
    for (int i = 0; i < 3; ++i) {
      if (l == bl::kSectionHeaders[i]) {
        scan.header_order.push_back(i);
        current = i;
        header = true;
      }
    }
    if (header) continue;
    if (l == bl::kProvenanceHeader) current = -1;
    if (current < 0) continue;
    scan.section_lines[current].push_back(l);
    if (l.rfind(bl::kObjectMarker, 0) == 0) {
      scan.markers[current].push_back(l.substr(bl::kObjectMarker.size()));
    }
  }
  return scan;
}

}  // namespace

ValidationReport validate_script(const std::string& text, const std::vector<std::string>* expected_ids) {
  ValidationReport report;
  check_syntax(text, report.violations);

  const SectionScan scan = scan_sections(text);
  for (int i = 0; i < 3; ++i) {
    const auto n = std::count(scan.header_order.begin(), scan.header_order.end(), i);
    if (n != 1) {
      report.violations.push_back({ViolationKind::Ordering, "section " + std::to_string(i + 1) +
                                                                " header appears " + std::to_string(n) +
                                                                " times"});
    }
  }
  if (!std::is_sorted(scan.header_order.begin(), scan.header_order.end())) {
    report.violations.push_back({ViolationKind::Ordering, "sections are out of order"});
  }

  std::vector<std::string> ids;
  if (expected_ids) ids = *expected_ids;
  for (const auto& m : scan.markers)
    for (const auto& id : m) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (const auto& id : ids) {
    for (int i = 0; i < 3; ++i) {
      const auto n = std::count(scan.markers[i].begin(), scan.markers[i].end(), id);
      if (n != 1) {
        report.violations.push_back({ViolationKind::Coverage, "object " + id + " appears " +
                                                                  std::to_string(n) + " times in section " +
                                                                  std::to_string(i + 1)});
      }
    }
  }
  return report;
}

std::map<std::string, ExtractedProperties> extract_properties(const std::string& text) {
  std::map<std::string, ExtractedProperties> out;
  const SectionScan scan = scan_sections(text);
  std::string current;
  for (const auto& l : scan.section_lines[1]) {
    if (l.rfind(bl::kObjectMarker, 0) == 0) {
      current = l.substr(bl::kObjectMarker.size());
      continue;
    }
    if (current.empty() || l.rfind(bl::kPropsPrefix, 0) != 0) continue;
    try {
      const auto j = nlohmann::json::parse(l.substr(bl::kPropsPrefix.size()));
      out[current] = {j.at("mass").get<double>(), j.at("friction").get<double>(),
                      j.at("restitution").get<double>()};
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "property line for " + current + ": " + e.what());
    }
    current.clear();
  }
  return out;
}

}  // namespace sketchplay::emitter
