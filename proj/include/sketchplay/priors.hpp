#pragma once

#include "sketchplay/physics/collision.hpp"
#include "sketchplay/physics/world.hpp"
#include "sketchplay/scene.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sketchplay::priors {

struct Camera {
  Vec3 position = Vec3(0.0, -5.0, 0.0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
  double fov_deg = 45.0;  // vertical
  int width = 512;
  int height = 512;
  double near = 0.1;
  double far = 100.0;
};

// Throws DegenerateCamera when the view direction is undefined or parallel
// to `up`, ParameterOutOfRange for the numeric ranges.
void validate(const Camera& camera);

// Frames a bounding sphere from 2.5 radii away, looking slightly down.
Camera default_camera(const Vec3& center, double radius, int width = 512, int height = 512);

// Depth is distance along the view axis, in meters, clamped to [near, far];
// empty pixels hold `far`. Row 0 is the top of the image.
struct DepthMap {
  int width = 0;
  int height = 0;
  double near = 0.0;
  double far = 0.0;
  std::vector<double> depth;

  double at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> value;  // 0 or 1

  std::uint8_t at(int x, int y) const { return value[static_cast<std::size_t>(y) * width + x]; }
};

// Geometry for one frame body. Rigid bodies take their pose from the frame
// snapshot; deformables take node positions from Frame::deformable_nodes
// and are drawn as triangles, or as node spheres when no surface exists.
struct RenderBody {
  std::string id;
  physics::Shape shape = physics::Sphere{};
  std::optional<physics::Polyhedron> poly;
  bool deformable = false;
  std::vector<std::array<int, 3>> triangles;
  double node_radius = 0.0;
};

// Aligned with the frame body order of the world built from `scene`.
std::vector<RenderBody> render_bodies(const scene::Scene& scene);
std::vector<RenderBody> render_bodies(const physics::World& world);

struct RenderOptions {
  std::optional<physics::Plane> ground;  // drawn when set
};

DepthMap render_depth(const physics::Frame& frame, const std::vector<RenderBody>& bodies,
                      const Camera& camera, const RenderOptions& options = {});

// A pixel is an edge when its depth differs from some 4-neighbor by more
// than `threshold` meters. Throws ParameterOutOfRange for threshold <= 0.
EdgeMap render_edges(const DepthMap& depth, double threshold);

// Binary PGM (P5). Depth is 16-bit big-endian scaled over [near, far];
// edges are 8-bit 0/255.
std::string encode_depth_pgm(const DepthMap& depth);
std::string encode_edge_pgm(const EdgeMap& edges);

struct Pgm {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> values;
};
Pgm decode_pgm(const std::string& bytes);

std::string depth_file_name(int frame_number);
std::string edge_file_name(int frame_number);

}  // namespace sketchplay::priors
