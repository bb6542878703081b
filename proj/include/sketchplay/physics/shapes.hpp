#pragma once

#include "sketchplay/core.hpp"

#include <utility>
#include <variant>
#include <vector>

namespace sketchplay::physics {

struct Sphere {
  double radius = 0.5;
};

struct Box {
  Vec3 half_extents = Vec3::Constant(0.5);
};

// Counter-clockwise outline in the local xy-plane, extruded symmetrically
// along z. The outline's area centroid must sit at the origin so the body
// frame is the center of mass.
struct ConvexPrism {
  std::vector<Vec2> outline;
  double thickness = 0.1;
};

using Shape = std::variant<Sphere, Box, ConvexPrism>;

// Convex polyhedron in body coordinates; faces are counter-clockwise seen
// from outside, planes are normal . x = offset.
struct Polyhedron {
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> faces;
  std::vector<Vec3> normals;
  std::vector<double> offsets;
  std::vector<std::pair<int, int>> edges;
  std::vector<Vec3> edge_directions;  // unit, one per parallel class
};

Polyhedron make_polyhedron(const Box& box);
Polyhedron make_polyhedron(const ConvexPrism& prism);

double volume(const Shape& shape);
double bounding_radius(const Shape& shape);

// Body-frame inertia tensor about the center of mass for a uniform solid.
Mat3 inertia_tensor(const Shape& shape, double mass);

// Recenters an outline so its area centroid is the origin; returns the offset
// that was removed. Also orients the outline counter-clockwise.
Vec2 center_outline(std::vector<Vec2>& outline);

}  // namespace sketchplay::physics
