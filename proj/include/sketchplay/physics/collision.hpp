#pragma once

#include "sketchplay/physics/shapes.hpp"

#include <vector>

namespace sketchplay::physics {

// A shape placed in the world. Polyhedron data is optional and only used for
// boxes and prisms.
struct Placement {
  const Shape* shape = nullptr;
  const Polyhedron* poly = nullptr;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

struct ContactPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // from the first shape toward the second
  double separation = 0.0;      // negative when penetrating
};

struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;  // normal . x = offset
};

// Contacts whose separation is below `margin` are reported, so bodies that
// are about to touch within a step are included.
std::vector<ContactPoint> collide(const Placement& a, const Placement& b, double margin);
std::vector<ContactPoint> collide(const Plane& plane, const Placement& b, double margin);

// Signed distance from a point to a placed shape and the outward surface
// normal at the closest feature. Used for deformable nodes and tests.
double signed_distance(const Placement& shape, const Vec3& point, Vec3* normal);

}  // namespace sketchplay::physics
