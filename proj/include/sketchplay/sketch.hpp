#pragma once

#include "sketchplay/core.hpp"
#include "sketchplay/trajectory.hpp"

#include <string>
#include <vector>

namespace sketchplay::sketch {

using trajectory::Stroke;

struct Box2 {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();

  double width() const { return max.x() - min.x(); }
  double height() const { return max.y() - min.y(); }
  double diagonal() const { return (max - min).norm(); }
  bool contains(const Vec2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
};

struct SketchCanvas {
  std::vector<Stroke> strokes;
  Box2 extent;
};

struct Descriptors {
  double aspect_ratio = 1.0;    // long side / short side of the minimum-area rectangle
  double compactness = 0.0;     // 4*pi*area / perimeter^2 of the outline
  int stroke_count = 0;
  double area = 0.0;            // m^2
  double rectangularity = 0.0;  // area / minimum-area rectangle area
};

struct SketchObject {
  std::string id;
  std::vector<std::size_t> stroke_indices;  // into SketchCanvas::strokes
  std::vector<Vec2> outline;                // convex hull, counter-clockwise
  Box2 bbox;
  Vec2 centroid = Vec2::Zero();
  Descriptors descriptors;
};

enum class PrimitiveKind { ExtrudedPrism, Box, Sphere };

std::string_view to_string(PrimitiveKind kind);

// Local frame: the sketch plane is z = 0 and prisms extrude along +z.
struct MeshPrimitive {
  PrimitiveKind kind = PrimitiveKind::ExtrudedPrism;
  // Prism
  std::vector<Vec2> outline;
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> faces;  // outward, counter-clockwise
  double thickness = 0.0;
  // Box: center, half extents, rotation about z (radians).
  // Sphere: center and radius.
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();
  double angle = 0.0;
  double radius = 0.0;
  double volume = 0.0;  // m^3
};

inline constexpr double kDefaultTemporalGap = 0.5;
inline constexpr double kDefaultSpatialGapFraction = 0.15;
inline constexpr double kFitThreshold = 0.9;
inline constexpr double kMinOutlineArea = 1e-8;

Stroke beautify_stroke(const Stroke& stroke, double epsilon);

std::vector<SketchObject> segment_objects(const SketchCanvas& canvas,
                                          double temporal_gap = kDefaultTemporalGap,
                                          double spatial_gap_fraction = kDefaultSpatialGapFraction);

// Thickness default used by the pipeline: 0.2 * min(bbox width, height).
double default_thickness(const SketchObject& object);

MeshPrimitive lift_to_3d(const SketchObject& object, double thickness, bool fit_primitives);

// Geometry helpers shared with other modules and tests.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);
double polygon_area(const std::vector<Vec2>& polygon);  // signed, CCW positive
double polygon_perimeter(const std::vector<Vec2>& polygon);
Vec2 polygon_centroid(const std::vector<Vec2>& polygon);
Descriptors describe_outline(const std::vector<Vec2>& outline, int stroke_count);
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

}  // namespace sketchplay::sketch
