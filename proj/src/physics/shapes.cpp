#include "sketchplay/physics/shapes.hpp"

#include "sketchplay/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sketchplay::physics {

namespace {

void finish(Polyhedron& poly) {
  poly.normals.clear();
  poly.offsets.clear();
  for (const auto& f : poly.faces) {
    // Newell normal; robust for planar polygons of any vertex count.
    Vec3 n = Vec3::Zero();
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec3& a = poly.vertices[f[i]];
      const Vec3& b = poly.vertices[f[(i + 1) % f.size()]];
      n += Vec3((a.y() - b.y()) * (a.z() + b.z()), (a.z() - b.z()) * (a.x() + b.x()),
                (a.x() - b.x()) * (a.y() + b.y()));
    }
    n.normalize();
    poly.normals.push_back(n);
    poly.offsets.push_back(n.dot(poly.vertices[f[0]]));
  }
  poly.edges.clear();
  for (const auto& f : poly.faces) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      int a = f[i], b = f[(i + 1) % f.size()];
      if (a > b) std::swap(a, b);
      if (std::find(poly.edges.begin(), poly.edges.end(), std::make_pair(a, b)) == poly.edges.end())
        poly.edges.emplace_back(a, b);
    }
  }
  poly.edge_directions.clear();
  for (const auto& [a, b] : poly.edges) {
    const Vec3 d = (poly.vertices[b] - poly.vertices[a]).normalized();
    const bool seen = std::any_of(poly.edge_directions.begin(), poly.edge_directions.end(),
                                  [&](const Vec3& e) { return e.cross(d).norm() < 1e-9; });
    if (!seen) poly.edge_directions.push_back(d);
  }
}

Mat3 polyhedron_covariance(const Polyhedron& poly, double* volume_out) {
  // Fan each face into triangles and sum the covariance of the tetrahedra
  // spanned with the origin.
  Mat3 canonical;
  canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  canonical /= 120.0;
  Mat3 cov = Mat3::Zero();
  double vol = 0.0;
  for (const auto& f : poly.faces) {
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      Mat3 a;
      a.col(0) = poly.vertices[f[0]];
      a.col(1) = poly.vertices[f[i]];
      a.col(2) = poly.vertices[f[i + 1]];
      const double det = a.determinant();
      cov += det * a * canonical * a.transpose();
      vol += det / 6.0;
    }
  }
  if (volume_out) *volume_out = vol;
  return cov;
}

}  // namespace

Vec2 center_outline(std::vector<Vec2>& outline) {
  if (sketch::polygon_area(outline) < 0.0) std::reverse(outline.begin(), outline.end());
  const Vec2 c = sketch::polygon_centroid(outline);
  for (auto& p : outline) p -= c;
  return c;
}

Polyhedron make_polyhedron(const Box& box) {
  const Vec3& h = box.half_extents;
  Polyhedron poly;
  for (int i = 0; i < 8; ++i) {
    poly.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                               (i & 4) ? h.z() : -h.z());
  }
  poly.faces = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  finish(poly);
  return poly;
}

Polyhedron make_polyhedron(const ConvexPrism& prism) {
  const int n = static_cast<int>(prism.outline.size());
  const double hz = 0.5 * prism.thickness;
  Polyhedron poly;
  for (const auto& p : prism.outline) poly.vertices.emplace_back(p.x(), p.y(), -hz);
  for (const auto& p : prism.outline) poly.vertices.emplace_back(p.x(), p.y(), hz);
  std::vector<int> bottom, top;
  for (int i = n - 1; i >= 0; --i) bottom.push_back(i);
  for (int i = 0; i < n; ++i) top.push_back(n + i);
  poly.faces.push_back(bottom);
  poly.faces.push_back(top);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    poly.faces.push_back({i, j, n + j, n + i});
  }
  finish(poly);
  return poly;
}

double volume(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return 4.0 / 3.0 * std::numbers::pi * s.radius * s.radius * s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          return 8.0 * s.half_extents.prod();
        } else {
          return std::abs(sketch::polygon_area(s.outline)) * s.thickness;
        }
      },
      shape);
}

double bounding_radius(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return s.radius;
        } else if constexpr (std::is_same_v<T, Box>) {
          return s.half_extents.norm();
        } else {
          double r2 = 0.0;
          for (const auto& p : s.outline) r2 = std::max(r2, p.squaredNorm());
          return std::sqrt(r2 + 0.25 * s.thickness * s.thickness);
        }
      },
      shape);
}

Mat3 inertia_tensor(const Shape& shape, double mass) {
  return std::visit(
      [mass](const auto& s) -> Mat3 {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return Mat3::Identity() * (0.4 * mass * s.radius * s.radius);
        } else if constexpr (std::is_same_v<T, Box>) {
          const Vec3 e = 2.0 * s.half_extents;
          const Vec3 sq = e.cwiseProduct(e);
          return Vec3(sq.y() + sq.z(), sq.x() + sq.z(), sq.x() + sq.y()).asDiagonal() * (mass / 12.0);
        } else {
          double vol = 0.0;
          const Mat3 cov = polyhedron_covariance(make_polyhedron(s), &vol);
          const Mat3 c = cov * (mass / vol);
          return Mat3::Identity() * c.trace() - c;
        }
      },
      shape);
}

}  // namespace sketchplay::physics
