#include "sketchplay/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace sketchplay::sketch {

namespace {

struct MinAreaRect {
  Vec2 center = Vec2::Zero();
  Vec2 size = Vec2::Zero();  // along (axis, perp)
  double angle = 0.0;        // of the first axis
  double area = 0.0;
};

MinAreaRect min_area_rect(const std::vector<Vec2>& hull) {
  MinAreaRect best;
  best.area = std::numeric_limits<double>::infinity();
  auto try_axis = [&](const Vec2& axis) {
    const Vec2 perp(-axis.y(), axis.x());
    double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
    double lo_v = lo_u, hi_v = -lo_u;
    for (const auto& p : hull) {
      const double u = p.dot(axis), v = p.dot(perp);
      lo_u = std::min(lo_u, u), hi_u = std::max(hi_u, u);
      lo_v = std::min(lo_v, v), hi_v = std::max(hi_v, v);
    }
    const double area = (hi_u - lo_u) * (hi_v - lo_v);
    if (area < best.area) {
      best.area = area;
      best.size = Vec2(hi_u - lo_u, hi_v - lo_v);
      best.center = axis * (0.5 * (lo_u + hi_u)) + perp * (0.5 * (lo_v + hi_v));
      best.angle = std::atan2(axis.y(), axis.x());
    }
  };
  if (hull.size() < 3) {
    try_axis(Vec2::UnitX());
    return best;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 e = hull[(i + 1) % hull.size()] - hull[i];
    const double len = e.norm();
    if (len > 0.0) try_axis(e / len);
  }
  return best;
}

Vec2 xy(const Vec3& p) { return p.head<2>(); }

}  // namespace

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::ExtrudedPrism: return "extruded_prism";
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::Sphere: return "sphere";
  }
  return "unknown";
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double u = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + u * ab)).norm();
}

Stroke beautify_stroke(const Stroke& stroke, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::ParameterOutOfRange, "epsilon must be >= 0");
  trajectory::validate_stroke(stroke);
  if (epsilon == 0.0) return stroke;

  const auto& in = stroke.points;
  const std::size_t n = in.size();
  std::vector<char> keep(n, 0);
  keep[0] = 1;
  keep[n - 1] = 1;

  // Iterative Ramer-Douglas-Peucker over index spans.
  std::vector<std::pair<std::size_t, std::size_t>> spans{{0, n - 1}};
  while (!spans.empty()) {
    const auto [first, last] = spans.back();
    spans.pop_back();
    double worst = -1.0;
    std::size_t worst_index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = point_segment_distance(in[i].pos, in[first].pos, in[last].pos);
      if (d > worst) worst = d, worst_index = i;
    }
    if (worst > epsilon) {
      keep[worst_index] = 1;
      spans.emplace_back(first, worst_index);
      spans.emplace_back(worst_index, last);
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) kept.push_back(i);

  Vec3 first_pos = in.front().pos;
  Vec3 last_pos = in.back().pos;
  const double closure_gap = (first_pos - last_pos).norm();
  if (kept.size() >= 4 && closure_gap <= 2.0 * epsilon) {
    // Snap both endpoints onto their midpoint; each moves by at most epsilon.
    const Vec3 mid = 0.5 * (first_pos + last_pos);
    first_pos = last_pos = mid;
    // Moving an endpoint can push nearby input points past the tolerance;
    // split the end spans again until the bound holds.
    auto position = [&](std::size_t idx) -> Vec3 {
      if (idx == 0) return first_pos;
      if (idx == n - 1) return last_pos;
      return in[idx].pos;
    };
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
        const std::size_t a = kept[k], b = kept[k + 1];
        if (a != 0 && b != n - 1) continue;
        double worst = -1.0;
        std::size_t worst_index = a;
        for (std::size_t i = a + 1; i < b; ++i) {
          const double d = point_segment_distance(in[i].pos, position(a), position(b));
          if (d > worst) worst = d, worst_index = i;
        }
        if (worst > epsilon) {
          kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(k) + 1, worst_index);
          changed = true;
          break;
        }
      }
    }
  }

  Stroke out;
  out.points.reserve(kept.size());
  for (std::size_t idx : kept) out.points.push_back(in[idx]);
  out.points.front().pos = first_pos;
  out.points.back().pos = last_pos;
  return out;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;

  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Vec2>& polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[(i + 1) % polygon.size()];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

double polygon_perimeter(const std::vector<Vec2>& polygon) {
  if (polygon.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i)
    total += (polygon[(i + 1) % polygon.size()] - polygon[i]).norm();
  return total;
}

Vec2 polygon_centroid(const std::vector<Vec2>& polygon) {
  const double area = polygon_area(polygon);
  if (polygon.empty()) return Vec2::Zero();
  if (std::abs(area) < 1e-300) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : polygon) mean += p;
    return mean / static_cast<double>(polygon.size());
  }
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[(i + 1) % polygon.size()];
    const double w = a.x() * b.y() - b.x() * a.y();
    c += (a + b) * w;
  }
  return c / (6.0 * area);
}

Descriptors describe_outline(const std::vector<Vec2>& outline, int stroke_count) {
  Descriptors d;
  d.stroke_count = stroke_count;
  d.area = std::abs(polygon_area(outline));
  const double perimeter = polygon_perimeter(outline);
  d.compactness = perimeter > 0.0 ? 4.0 * std::numbers::pi * d.area / (perimeter * perimeter) : 0.0;
  const MinAreaRect rect = min_area_rect(outline);
  const double long_side = std::max(rect.size.x(), rect.size.y());
  const double short_side = std::min(rect.size.x(), rect.size.y());
  d.aspect_ratio = long_side > 0.0 ? long_side / std::max(short_side, 1e-12) : 1.0;
  d.rectangularity = rect.area > 0.0 ? d.area / rect.area : 0.0;
  return d;
}

std::vector<SketchObject> segment_objects(const SketchCanvas& canvas, double temporal_gap,
                                          double spatial_gap_fraction) {
  if (canvas.strokes.empty()) throw Error(ErrorCode::EmptyCanvas, "canvas has no strokes");
  if (!(temporal_gap > 0.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "temporal_gap must be positive");
  }
  if (!(spatial_gap_fraction > 0.0 && spatial_gap_fraction < 1.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "spatial_gap_fraction must be in (0, 1)");
  }
  for (const auto& s : canvas.strokes) trajectory::validate_stroke(s);

  double diagonal = canvas.extent.diagonal();
  if (!(diagonal > 0.0)) {
    Box2 all{Vec2::Constant(std::numeric_limits<double>::infinity()),
             Vec2::Constant(-std::numeric_limits<double>::infinity())};
    for (const auto& s : canvas.strokes)
      for (const auto& p : s.points) all.min = all.min.cwiseMin(xy(p.pos)), all.max = all.max.cwiseMax(xy(p.pos));
    diagonal = all.diagonal();
  }
  const double spatial_gap = spatial_gap_fraction * diagonal;

  auto endpoint_gap = [&](std::size_t a, std::size_t b) {
    const auto& sa = canvas.strokes[a].points;
    const auto& sb = canvas.strokes[b].points;
    const Vec2 ea[2] = {xy(sa.front().pos), xy(sa.back().pos)};
    const Vec2 eb[2] = {xy(sb.front().pos), xy(sb.back().pos)};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : ea)
      for (const auto& q : eb) best = std::min(best, (p - q).norm());
    return best;
  };

  std::vector<std::vector<std::size_t>> groups{{0}};
  for (std::size_t i = 1; i < canvas.strokes.size(); ++i) {
    const double pause = canvas.strokes[i].start_time() - canvas.strokes[i - 1].end_time();
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j : groups.back()) gap = std::min(gap, endpoint_gap(j, i));
    if (pause > temporal_gap || gap > spatial_gap) {
      groups.push_back({i});
    } else {
      groups.back().push_back(i);
    }
  }

  std::vector<SketchObject> objects;
  objects.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    SketchObject obj;
    obj.id = "obj-" + std::to_string(g);
    obj.stroke_indices = groups[g];
    std::vector<Vec2> pts;
    for (std::size_t si : groups[g])
      for (const auto& p : canvas.strokes[si].points) pts.push_back(xy(p.pos));
    obj.bbox.min = obj.bbox.max = pts.front();
    for (const auto& p : pts) obj.bbox.min = obj.bbox.min.cwiseMin(p), obj.bbox.max = obj.bbox.max.cwiseMax(p);
    obj.outline = convex_hull(std::move(pts));
    obj.centroid = polygon_centroid(obj.outline);
    obj.descriptors = describe_outline(obj.outline, static_cast<int>(groups[g].size()));
    objects.push_back(std::move(obj));
  }
  return objects;
}

double default_thickness(const SketchObject& object) {
  return 0.2 * std::min(object.bbox.width(), object.bbox.height());
}

MeshPrimitive lift_to_3d(const SketchObject& object, double thickness, bool fit_primitives) {
  if (!(thickness > 0.0) || !std::isfinite(thickness)) {
    throw Error(ErrorCode::ParameterOutOfRange, "thickness must be positive");
  }
  std::vector<Vec2> outline = object.outline;
  const double signed_area = polygon_area(outline);
  const double area = std::abs(signed_area);
  if (outline.size() < 3 || area < kMinOutlineArea) {
    throw Error(ErrorCode::DegenerateOutline,
                object.id + ": outline area " + std::to_string(area) + " m^2");
  }
  if (signed_area < 0.0) std::reverse(outline.begin(), outline.end());

  MeshPrimitive prim;
  if (fit_primitives) {
    const Descriptors d = describe_outline(outline, object.descriptors.stroke_count);
    if (d.compactness > kFitThreshold) {
      prim.kind = PrimitiveKind::Sphere;
      prim.radius = std::sqrt(area / std::numbers::pi);
      const Vec2 c = polygon_centroid(outline);
      prim.center = Vec3(c.x(), c.y(), 0.0);
      prim.volume = 4.0 / 3.0 * std::numbers::pi * prim.radius * prim.radius * prim.radius;
      return prim;
    }
    if (d.rectangularity > kFitThreshold) {
      const MinAreaRect rect = min_area_rect(outline);
      prim.kind = PrimitiveKind::Box;
      prim.center = Vec3(rect.center.x(), rect.center.y(), 0.5 * thickness);
      prim.half_extents = Vec3(0.5 * rect.size.x(), 0.5 * rect.size.y(), 0.5 * thickness);
      prim.angle = rect.angle;
      prim.thickness = thickness;
      prim.volume = rect.size.x() * rect.size.y() * thickness;
      return prim;
    }
  }

  prim.kind = PrimitiveKind::ExtrudedPrism;
  prim.outline = outline;
  prim.thickness = thickness;
  const int n = static_cast<int>(outline.size());
  for (const auto& p : outline) prim.vertices.emplace_back(p.x(), p.y(), 0.0);
  for (const auto& p : outline) prim.vertices.emplace_back(p.x(), p.y(), thickness);
  std::vector<int> bottom, top;
  for (int i = n - 1; i >= 0; --i) bottom.push_back(i);
  for (int i = 0; i < n; ++i) top.push_back(n + i);
  prim.faces.push_back(bottom);
  prim.faces.push_back(top);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    prim.faces.push_back({i, j, n + j, n + i});
  }
  const Vec2 c = polygon_centroid(outline);
  prim.center = Vec3(c.x(), c.y(), 0.5 * thickness);
  prim.volume = area * thickness;
  return prim;
}

}  // namespace sketchplay::sketch
