#include "sketchplay/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace sketchplay::priors {

namespace {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
};

double hit_sphere(const Ray& ray, const Vec3& center, double radius) {
  const Vec3 oc = ray.origin - center;
  const double b = oc.dot(ray.dir);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kNoHit;
  const double s = std::sqrt(disc);
  if (-b - s > 0.0) return -b - s;
  if (-b + s > 0.0) return -b + s;  // origin inside the sphere
  return kNoHit;
}

// Cyrus-Beck clipping of the ray against the face planes in body space.
double hit_polyhedron(const Ray& ray, const physics::Polyhedron& poly, const Vec3& position,
                      const Mat3& rotation) {
  const Vec3 o = rotation.transpose() * (ray.origin - position);
  const Vec3 d = rotation.transpose() * ray.dir;
  double t_in = -kNoHit, t_out = kNoHit;
  for (std::size_t f = 0; f < poly.normals.size(); ++f) {
    const double denom = poly.normals[f].dot(d);
    const double dist = poly.offsets[f] - poly.normals[f].dot(o);
    if (denom == 0.0) {
      if (dist < 0.0) return kNoHit;
      continue;
    }
    const double t = dist / denom;
    if (denom < 0.0) t_in = std::max(t_in, t);
    else t_out = std::min(t_out, t);
    if (t_in > t_out) return kNoHit;
  }
  if (t_out <= 0.0) return kNoHit;
  return std::max(t_in, 0.0);
}

double hit_triangle(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = ray.dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return kNoHit;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return kNoHit;
  const Vec3 q = s.cross(e1);
  const double v = ray.dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return kNoHit;
  const double t = e2.dot(q) * inv;
  return t > 0.0 ? t : kNoHit;
}

// A body resolved into world space for one frame.
struct Placed {
  const RenderBody* body = nullptr;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  const std::vector<Vec3>* nodes = nullptr;
  Vec3 bound_center = Vec3::Zero();
  double bound_radius = 0.0;
};

double hit(const Ray& ray, const Placed& p) {
  if (hit_sphere(ray, p.bound_center, p.bound_radius) == kNoHit) return kNoHit;
  const RenderBody& b = *p.body;
  if (!b.deformable) {
    if (const auto* s = std::get_if<physics::Sphere>(&b.shape)) return hit_sphere(ray, p.position, s->radius);
    return hit_polyhedron(ray, *b.poly, p.position, p.rotation);
  }
  double best = kNoHit;
  const auto& nodes = *p.nodes;
  if (!b.triangles.empty()) {
    for (const auto& t : b.triangles) best = std::min(best, hit_triangle(ray, nodes[t[0]], nodes[t[1]], nodes[t[2]]));
  } else {
    for (const auto& n : nodes) best = std::min(best, hit_sphere(ray, n, b.node_radius));
  }
  return best;
}

}  // namespace

void validate(const Camera& c) {
  const Vec3 view = c.look_at - c.position;
  if (!(view.norm() > 1e-12) || !view.allFinite()) {
    throw Error(ErrorCode::DegenerateCamera, "look-at coincides with the camera position");
  }
  if (!(c.up.norm() > 0.0) || view.normalized().cross(c.up.normalized()).norm() < 1e-9) {
    throw Error(ErrorCode::DegenerateCamera, "up vector is parallel to the view direction");
  }
  if (!(c.fov_deg > 0.0 && c.fov_deg < 180.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "fov must be in (0, 180) degrees");
  }
  if (c.width < 8 || c.height < 8) throw Error(ErrorCode::ParameterOutOfRange, "image must be >= 8x8");
  if (!(c.near > 0.0) || !(c.far > c.near)) {
    throw Error(ErrorCode::ParameterOutOfRange, "need 0 < near < far");
  }
}

Camera default_camera(const Vec3& center, double radius, int width, int height) {
  Camera c;
  const Vec3 dir = Vec3(0.0, -1.0, 0.35).normalized();
  c.position = center + 2.5 * radius * dir;
  c.look_at = center;
  c.up = Vec3::UnitZ();
  c.fov_deg = 45.0;
  c.width = width;
  c.height = height;
  c.near = 0.05 * radius;
  c.far = 6.0 * radius;
  return c;
}

std::vector<RenderBody> render_bodies(const physics::World& world) {
  std::vector<RenderBody> out;
  for (const auto& b : world.rigid_bodies) {
    RenderBody r;
    r.id = b.id;
    r.shape = b.shape;
    if (const auto* box = std::get_if<physics::Box>(&b.shape)) r.poly = physics::make_polyhedron(*box);
    if (const auto* prism = std::get_if<physics::ConvexPrism>(&b.shape)) r.poly = physics::make_polyhedron(*prism);
    out.push_back(std::move(r));
  }
  for (const auto& s : world.soft_bodies) {
    RenderBody r;
    r.id = s.id;
    r.deformable = true;
    r.triangles = s.surface;
    double shortest = kNoHit;
    for (const auto& sp : s.springs) shortest = std::min(shortest, sp.rest_length);
    r.node_radius = s.springs.empty() ? 0.01 : 0.5 * shortest;
    out.push_back(std::move(r));
  }
  for (const auto& c : world.cloths) {
    RenderBody r;
    r.id = c.id;
    r.deformable = true;
    for (int i = 0; i + 1 < c.rows; ++i)
      for (int j = 0; j + 1 < c.cols; ++j) {
        const int a = c.node_index(i, j), b = c.node_index(i + 1, j);
        const int d = c.node_index(i, j + 1), e = c.node_index(i + 1, j + 1);
        r.triangles.push_back({a, b, e});
        r.triangles.push_back({a, e, d});
      }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RenderBody> render_bodies(const scene::Scene& scene) {
  return render_bodies(scene::build_world(scene));
}

DepthMap render_depth(const physics::Frame& frame, const std::vector<RenderBody>& bodies,
                      const Camera& camera, const RenderOptions& options) {
  validate(camera);
  if (bodies.size() != frame.bodies.size()) {
    throw Error(ErrorCode::ParameterOutOfRange, "render bodies do not match the frame");
  }

  std::vector<Placed> placed;
  std::size_t deformable_index = 0;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    Placed p;
    p.body = &bodies[i];
    const auto& snap = frame.bodies[i];
    if (bodies[i].deformable) {
      // Logs carry no node data; such bodies are left out of the render.
      if (deformable_index >= frame.deformable_nodes.size()) continue;
      p.nodes = &frame.deformable_nodes[deformable_index++];
      if (p.nodes->empty()) continue;
      Vec3 lo = p.nodes->front(), hi = lo;
      for (const auto& n : *p.nodes) lo = lo.cwiseMin(n), hi = hi.cwiseMax(n);
      p.bound_center = 0.5 * (lo + hi);
      p.bound_radius = 0.5 * (hi - lo).norm() + bodies[i].node_radius + 1e-9;
    } else {
      p.position = snap.position;
      p.rotation = snap.orientation.normalized().toRotationMatrix();
      p.bound_center = snap.position;
      p.bound_radius = physics::bounding_radius(bodies[i].shape) * (1.0 + 1e-9);
    }
    placed.push_back(p);
  }

  const Vec3 forward = (camera.look_at - camera.position).normalized();
  const Vec3 right = forward.cross(camera.up).normalized();
  const Vec3 up = right.cross(forward);
  const double tan_half = std::tan(0.5 * camera.fov_deg * std::numbers::pi / 180.0);
  const double aspect = static_cast<double>(camera.width) / camera.height;

  DepthMap map;
  map.width = camera.width;
  map.height = camera.height;
  map.near = camera.near;
  map.far = camera.far;
  map.depth.assign(static_cast<std::size_t>(map.width) * map.height, camera.far);
  for (int y = 0; y < map.height; ++y) {
    const double sy = (1.0 - 2.0 * (y + 0.5) / map.height) * tan_half;
    for (int x = 0; x < map.width; ++x) {
      const double sx = (2.0 * (x + 0.5) / map.width - 1.0) * tan_half * aspect;
      const Ray ray{camera.position, (forward + sx * right + sy * up).normalized()};
      double t = kNoHit;
      for (const auto& p : placed) t = std::min(t, hit(ray, p));
      if (options.ground) {
        const double denom = options.ground->normal.dot(ray.dir);
        if (denom != 0.0) {
          const double tg = (options.ground->offset - options.ground->normal.dot(ray.origin)) / denom;
          if (tg > 0.0) t = std::min(t, tg);
        }
      }
      if (t == kNoHit) continue;
      const double z = t * ray.dir.dot(forward);
      map.depth[static_cast<std::size_t>(y) * map.width + x] = std::clamp(z, camera.near, camera.far);
    }
  }
  return map;
}

EdgeMap render_edges(const DepthMap& depth, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "edge threshold must be positive");
  EdgeMap edges;
  edges.width = depth.width;
  edges.height = depth.height;
  edges.value.assign(depth.depth.size(), 0);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const double d = depth.at(x, y);
      double worst = 0.0;
      if (x > 0) worst = std::max(worst, std::abs(d - depth.at(x - 1, y)));
      if (x + 1 < depth.width) worst = std::max(worst, std::abs(d - depth.at(x + 1, y)));
      if (y > 0) worst = std::max(worst, std::abs(d - depth.at(x, y - 1)));
      if (y + 1 < depth.height) worst = std::max(worst, std::abs(d - depth.at(x, y + 1)));
      edges.value[static_cast<std::size_t>(y) * depth.width + x] = worst > threshold ? 1 : 0;
    }
  }
  return edges;
}

std::string encode_depth_pgm(const DepthMap& depth) {
  std::string out = "P5\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n65535\n";
  out.reserve(out.size() + depth.depth.size() * 2);
  const double span = depth.far - depth.near;
  for (double d : depth.depth) {
    const double scaled = std::clamp((d - depth.near) / span, 0.0, 1.0) * 65535.0;
    const auto v = static_cast<std::uint16_t>(std::lround(scaled));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

std::string encode_edge_pgm(const EdgeMap& edges) {
  std::string out = "P5\n" + std::to_string(edges.width) + " " + std::to_string(edges.height) + "\n255\n";
  for (auto v : edges.value) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

Pgm decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  Pgm pgm;
  in >> magic >> pgm.width >> pgm.height >> pgm.maxval;
  if (!in || magic != "P5" || pgm.width <= 0 || pgm.height <= 0 || pgm.maxval <= 0 || pgm.maxval > 65535) {
    throw Error(ErrorCode::MalformedRecord, "not a binary PGM");
  }
  in.get();  // single whitespace after the header
  const std::size_t offset = static_cast<std::size_t>(in.tellg());
  const std::size_t n = static_cast<std::size_t>(pgm.width) * pgm.height;
  const std::size_t bytes_per = pgm.maxval > 255 ? 2 : 1;
  if (bytes.size() - offset != n * bytes_per) throw Error(ErrorCode::MalformedRecord, "PGM size mismatch");
  pgm.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset + i * bytes_per);
    pgm.values[i] = bytes_per == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
  }
  return pgm;
}

std::string depth_file_name(int frame_number) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "depth_%06d.pgm", frame_number);
  return buf;
}

std::string edge_file_name(int frame_number) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "edge_%06d.pgm", frame_number);
  return buf;
}

}  // namespace sketchplay::priors
