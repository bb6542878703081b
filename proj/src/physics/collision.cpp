#include "sketchplay/physics/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sketchplay::physics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct WorldPoly {
  const Polyhedron* local = nullptr;
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<double> offsets;
  Vec3 center = Vec3::Zero();
};

WorldPoly to_world(const Placement& p) {
  WorldPoly w;
  w.local = p.poly;
  w.center = p.position;
  w.vertices.reserve(p.poly->vertices.size());
  for (const auto& v : p.poly->vertices) w.vertices.push_back(p.rotation * v + p.position);
  for (std::size_t f = 0; f < p.poly->faces.size(); ++f) {
    const Vec3 n = p.rotation * p.poly->normals[f];
    w.normals.push_back(n);
    w.offsets.push_back(p.poly->offsets[f] + n.dot(p.position));
  }
  return w;
}

struct FaceQuery {
  double separation = -kInf;
  int face = -1;
};

FaceQuery query_faces(const WorldPoly& a, const WorldPoly& b) {
  FaceQuery best;
  for (std::size_t f = 0; f < a.normals.size(); ++f) {
    double s = kInf;
    for (const auto& v : b.vertices) s = std::min(s, a.normals[f].dot(v) - a.offsets[f]);
    if (s > best.separation) best = {s, static_cast<int>(f)};
  }
  return best;
}

struct EdgeQuery {
  double separation = -kInf;
  Vec3 axis = Vec3::Zero();
};

std::pair<double, double> project(const std::vector<Vec3>& verts, const Vec3& axis) {
  double lo = kInf, hi = -kInf;
  for (const auto& v : verts) {
    const double d = axis.dot(v);
    lo = std::min(lo, d), hi = std::max(hi, d);
  }
  return {lo, hi};
}

EdgeQuery query_edges(const WorldPoly& a, const Mat3& ra, const WorldPoly& b, const Mat3& rb) {
  EdgeQuery best;
  for (const auto& ea_local : a.local->edge_directions) {
    const Vec3 ea = ra * ea_local;
    for (const auto& eb_local : b.local->edge_directions) {
      const Vec3 eb = rb * eb_local;
      Vec3 axis = ea.cross(eb);
      const double len = axis.norm();
      if (len < 1e-6) continue;
      axis /= len;
      if (axis.dot(b.center - a.center) < 0.0) axis = -axis;
      const double s = project(b.vertices, axis).first - project(a.vertices, axis).second;
      if (s > best.separation) best = {s, axis};
    }
  }
  return best;
}

// Closest points between segments p1-q1 and p2-q2.
void closest_segment_points(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                            Vec3* c1, Vec3* c2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= 1e-18 && e <= 1e-18) {
    // both degenerate
  } else if (a <= 1e-18) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 1e-18) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 1e-18 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  *c1 = p1 + d1 * s;
  *c2 = p2 + d2 * t;
}

// Edge of `poly` parallel to `dir` whose midpoint is extreme along `axis`.
std::pair<Vec3, Vec3> support_edge(const WorldPoly& poly, const Vec3& dir, const Vec3& axis,
                                   bool maximize) {
  double best = maximize ? -kInf : kInf;
  std::pair<Vec3, Vec3> out;
  for (const auto& [i, j] : poly.local->edges) {
    const Vec3 a = poly.vertices[i], b = poly.vertices[j];
    const Vec3 d = (b - a).normalized();
    if (d.cross(dir).norm() > 1e-6) continue;
    const double m = axis.dot(0.5 * (a + b));
    if (maximize ? m > best : m < best) best = m, out = {a, b};
  }
  return out;
}

std::vector<ContactPoint> face_contact(const WorldPoly& ref, int ref_face, const WorldPoly& inc,
                                       bool flip, double margin) {
  const Vec3 n = ref.normals[ref_face];
  const double d = ref.offsets[ref_face];

  int inc_face = 0;
  double most_anti = kInf;
  for (std::size_t f = 0; f < inc.normals.size(); ++f) {
    const double c = inc.normals[f].dot(n);
    if (c < most_anti) most_anti = c, inc_face = static_cast<int>(f);
  }
  std::vector<Vec3> poly;
  for (int idx : inc.local->faces[inc_face]) poly.push_back(inc.vertices[idx]);

  const auto& rf = ref.local->faces[ref_face];
  for (std::size_t i = 0; i < rf.size() && !poly.empty(); ++i) {
    const Vec3& a = ref.vertices[rf[i]];
    const Vec3& b = ref.vertices[rf[(i + 1) % rf.size()]];
    const Vec3 side = (b - a).cross(n).normalized();
    const double limit = side.dot(a);
    std::vector<Vec3> clipped;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec3& p = poly[k];
      const Vec3& q = poly[(k + 1) % poly.size()];
      const double dp = side.dot(p) - limit, dq = side.dot(q) - limit;
      if (dp <= 0.0) clipped.push_back(p);
      if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0)) {
        clipped.push_back(p + (q - p) * (dp / (dp - dq)));
      }
    }
    poly = std::move(clipped);
  }

  // Clipping against coincident edges yields near-duplicate points.
  std::vector<ContactPoint> out;
  for (const auto& p : poly) {
    const double s = n.dot(p) - d;
    if (s >= margin) continue;
    const Vec3 at = p - n * (0.5 * s);
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const ContactPoint& c) {
      return (c.position - at).squaredNorm() < 1e-12;
    });
    if (!duplicate) out.push_back({at, flip ? Vec3(-n) : n, s});
  }
  return out;
}

std::vector<ContactPoint> poly_poly(const Placement& pa, const Placement& pb, double margin) {
  const WorldPoly a = to_world(pa), b = to_world(pb);
  const FaceQuery fa = query_faces(a, b);
  if (fa.separation > margin) return {};
  const FaceQuery fb = query_faces(b, a);
  if (fb.separation > margin) return {};
  const EdgeQuery ee = query_edges(a, pa.rotation, b, pb.rotation);
  if (ee.separation > margin) return {};

  const double face_sep = std::max(fa.separation, fb.separation);
  if (ee.separation > face_sep + 1e-4) {
    // Edge-edge: find the supporting edges and take their closest points.
    Vec3 ea = Vec3::Zero(), eb = Vec3::Zero();
    double best = -kInf;
    for (const auto& da : pa.poly->edge_directions) {
      for (const auto& db : pb.poly->edge_directions) {
        const Vec3 wa = pa.rotation * da, wb = pb.rotation * db;
        const Vec3 c = wa.cross(wb);
        if (c.norm() < 1e-6) continue;
        const double align = std::abs(c.normalized().dot(ee.axis));
        if (align > best) best = align, ea = wa, eb = wb;
      }
    }
    const auto [a0, a1] = support_edge(a, ea, ee.axis, true);
    const auto [b0, b1] = support_edge(b, eb, ee.axis, false);
    Vec3 ca, cb;
    closest_segment_points(a0, a1, b0, b1, &ca, &cb);
    return {{0.5 * (ca + cb), ee.axis, ee.separation}};
  }
  if (fb.separation > fa.separation + 1e-4) return face_contact(b, fb.face, a, true, margin);
  return face_contact(a, fa.face, b, false, margin);
}

// Closest point on a local polyhedron's surface to q; returns signed distance.
double poly_closest(const Polyhedron& poly, const Vec3& q, Vec3* closest, Vec3* normal) {
  double max_d = -kInf;
  int max_f = 0;
  for (std::size_t f = 0; f < poly.faces.size(); ++f) {
    const double d = poly.normals[f].dot(q) - poly.offsets[f];
    if (d > max_d) max_d = d, max_f = static_cast<int>(f);
  }
  if (max_d <= 0.0) {
    *normal = poly.normals[max_f];
    *closest = q - *normal * max_d;
    return max_d;
  }
  double best = kInf;
  for (std::size_t f = 0; f < poly.faces.size(); ++f) {
    const Vec3& n = poly.normals[f];
    const double d = n.dot(q) - poly.offsets[f];
    if (d <= 0.0) continue;
    const auto& face = poly.faces[f];
    const Vec3 proj = q - n * d;
    bool inside = true;
    for (std::size_t i = 0; i < face.size(); ++i) {
      const Vec3& a = poly.vertices[face[i]];
      const Vec3& b = poly.vertices[face[(i + 1) % face.size()]];
      if ((b - a).cross(proj - a).dot(n) < 0.0) {
        inside = false;
        break;
      }
    }
    if (inside) {
      if (d < best) best = d, *closest = proj;
      continue;
    }
    for (std::size_t i = 0; i < face.size(); ++i) {
      const Vec3& a = poly.vertices[face[i]];
      const Vec3& b = poly.vertices[face[(i + 1) % face.size()]];
      const Vec3 ab = b - a;
      const double u = std::clamp((q - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      const Vec3 c = a + u * ab;
      const double dist = (q - c).norm();
      if (dist < best) best = dist, *closest = c;
    }
  }
  *normal = (q - *closest) / best;
  return best;
}

std::vector<ContactPoint> sphere_poly(const Vec3& center, double radius, const Placement& poly,
                                      double margin) {
  const Vec3 q = poly.rotation.transpose() * (center - poly.position);
  Vec3 closest, n_local;
  const double d = poly_closest(*poly.poly, q, &closest, &n_local);
  const double sep = d - radius;
  if (sep >= margin) return {};
  const Vec3 n = poly.rotation * n_local;
  return {{center - n * (radius + 0.5 * sep), n, sep}};
}

}  // namespace

std::vector<ContactPoint> collide(const Placement& a, const Placement& b, double margin) {
  const auto* sa = std::get_if<Sphere>(a.shape);
  const auto* sb = std::get_if<Sphere>(b.shape);
  if (sa && sb) {
    const Vec3 delta = b.position - a.position;
    const double dist = delta.norm();
    const double sep = dist - sa->radius - sb->radius;
    if (sep >= margin) return {};
    const Vec3 n = dist > 1e-12 ? Vec3(delta / dist) : Vec3::UnitZ();
    return {{a.position + n * (sa->radius + 0.5 * sep), n, sep}};
  }
  if (sa) {
    auto pts = sphere_poly(a.position, sa->radius, b, margin);
    for (auto& p : pts) p.normal = -p.normal;
    return pts;
  }
  if (sb) return sphere_poly(b.position, sb->radius, a, margin);
  return poly_poly(a, b, margin);
}

std::vector<ContactPoint> collide(const Plane& plane, const Placement& b, double margin) {
  std::vector<ContactPoint> out;
  if (const auto* s = std::get_if<Sphere>(b.shape)) {
    const double sep = plane.normal.dot(b.position) - plane.offset - s->radius;
    if (sep < margin) {
      out.push_back({b.position - plane.normal * (s->radius + 0.5 * sep), plane.normal, sep});
    }
    return out;
  }
  for (const auto& v : b.poly->vertices) {
    const Vec3 w = b.rotation * v + b.position;
    const double sep = plane.normal.dot(w) - plane.offset;
    if (sep < margin) out.push_back({w - plane.normal * (0.5 * sep), plane.normal, sep});
  }
  return out;
}

double signed_distance(const Placement& shape, const Vec3& point, Vec3* normal) {
  if (const auto* s = std::get_if<Sphere>(shape.shape)) {
    const Vec3 d = point - shape.position;
    const double len = d.norm();
    *normal = len > 1e-12 ? Vec3(d / len) : Vec3::UnitZ();
    return len - s->radius;
  }
  const Vec3 q = shape.rotation.transpose() * (point - shape.position);
  Vec3 closest, n_local;
  const double d = poly_closest(*shape.poly, q, &closest, &n_local);
  *normal = shape.rotation * n_local;
  return d;
}

}  // namespace sketchplay::physics
