#include "sketchplay/priors.hpp"

#include "support.hpp"

#include <numbers>

namespace sketchplay::priors {
namespace {

using testing::Gen;

// Unit sphere 5 m in front of a camera looking down +y.
struct SphereFixture {
  physics::Frame frame;
  std::vector<RenderBody> bodies;
  Camera camera;

  explicit SphereFixture(int size) {
    RenderBody body;
    body.id = "ball";
    body.shape = physics::Sphere{1.0};
    bodies.push_back(body);
    frame.bodies.push_back({"ball", Vec3(0, 5, 0), Quat::Identity(), Vec3::Zero(), Vec3::Zero()});
    camera.position = Vec3::Zero();
    camera.look_at = Vec3(0, 1, 0);
    camera.width = size;
    camera.height = size;
  }
};

// Independent per-pixel oracle: view-axis depth of the ray through the pixel
// center against a sphere, or `far` on a miss.
double sphere_oracle(const Camera& cam, int x, int y, const Vec3& center, double radius) {
  const double tan_half = std::tan(cam.fov_deg * std::numbers::pi / 360.0);
  const Vec3 fwd = (cam.look_at - cam.position).normalized();
  const Vec3 right = fwd.cross(cam.up).normalized();
  const Vec3 up = right.cross(fwd);
  const double u = ((x + 0.5) / cam.width * 2.0 - 1.0) * tan_half * cam.width / cam.height;
  const double v = (1.0 - (y + 0.5) / cam.height * 2.0) * tan_half;
  const Vec3 dir = (fwd + u * right + v * up).normalized();
  // |o + t d - c|^2 = r^2 solved with the half-b form.
  const Vec3 oc = cam.position - center;
  const double b = dir.dot(oc);
  const double disc = b * b - (oc.squaredNorm() - radius * radius);
  if (disc < 0) return cam.far;
  const double t = -b - std::sqrt(disc);
  return std::clamp(t * dir.dot(fwd), cam.near, cam.far);
}

// Brute-force edge oracle: scan the 3x3 window and keep only the 4-neighbors.
EdgeMap edge_oracle(const DepthMap& d, double threshold) {
  EdgeMap e;
  e.width = d.width;
  e.height = d.height;
  e.value.assign(d.depth.size(), 0);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      bool edge = false;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (std::abs(dx) + std::abs(dy) != 1) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= d.width || ny >= d.height) continue;
          if (std::abs(d.depth[y * d.width + x] - d.depth[ny * d.width + nx]) > threshold) edge = true;
        }
      }
      e.value[y * d.width + x] = edge;
    }
  }
  return e;
}

TEST(Depth, SphereAtFiveMetersReadsFourAtTheCenter) {
  SphereFixture f(128);
  const DepthMap d = render_depth(f.frame, f.bodies, f.camera);
  const double quantum = (f.camera.far - f.camera.near) / 65535.0;
  const Pgm pgm = decode_pgm(encode_depth_pgm(d));
  for (int y : {63, 64}) {
    for (int x : {63, 64}) {
      EXPECT_NEAR(d.at(x, y), 4.0, 1e-3);
      const double decoded = f.camera.near + pgm.values[y * 128 + x] * quantum;
      EXPECT_NEAR(decoded, 4.0, quantum);
    }
  }
  EXPECT_EQ(d.at(0, 0), f.camera.far);
}

TEST(Depth, EveryPixelMatchesTheRayOracle) {
  SphereFixture f(96);
  f.camera.width = 128;  // non-square exercises the aspect ratio
  const DepthMap d = render_depth(f.frame, f.bodies, f.camera);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      ASSERT_NEAR(d.at(x, y), sphere_oracle(f.camera, x, y, Vec3(0, 5, 0), 1.0), 1e-9) << x << "," << y;
}

TEST(Depth, BoxFaceIsFlatAndGroundIsOptional) {
  RenderBody box;
  box.id = "crate";
  box.shape = physics::Box{Vec3(0.5, 0.5, 0.5)};
  box.poly = physics::make_polyhedron(physics::Box{Vec3(0.5, 0.5, 0.5)});
  physics::Frame frame;
  frame.bodies.push_back({"crate", Vec3(0, 3.5, 0), Quat::Identity(), Vec3::Zero(), Vec3::Zero()});
  Camera cam;
  cam.position = Vec3::Zero();
  cam.look_at = Vec3(0, 1, 0);
  cam.width = cam.height = 64;
  const DepthMap d = render_depth(frame, {box}, cam);
  for (int y = 28; y < 36; ++y)
    for (int x = 28; x < 36; ++x) EXPECT_NEAR(d.at(x, y), 3.0, 1e-12);

  RenderOptions with_ground;
  with_ground.ground = physics::Plane{Vec3::UnitZ(), -0.5};
  const DepthMap g = render_depth(frame, {box}, cam, with_ground);
  EXPECT_EQ(d.at(32, 63), cam.far);
  EXPECT_LT(g.at(32, 63), cam.far);
}

TEST(Depth, RotatedBoxMatchesEquivalentBox) {
  // A box turned 90 degrees about the view axis looks like its swapped twin.
  const physics::Box tall{Vec3(0.2, 0.3, 0.6)}, wide{Vec3(0.6, 0.3, 0.2)};
  auto body = [](const physics::Box& b) {
    RenderBody r;
    r.shape = b;
    r.poly = physics::make_polyhedron(b);
    return r;
  };
  Camera cam;
  cam.position = Vec3::Zero();
  cam.look_at = Vec3(0, 1, 0);
  cam.width = cam.height = 64;
  physics::Frame a, b;
  a.bodies.push_back({"x", Vec3(0, 4, 0), Quat(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY())), Vec3::Zero(),
                      Vec3::Zero()});
  b.bodies.push_back({"x", Vec3(0, 4, 0), Quat::Identity(), Vec3::Zero(), Vec3::Zero()});
  const DepthMap da = render_depth(a, {body(tall)}, cam), db = render_depth(b, {body(wide)}, cam);
  for (std::size_t i = 0; i < da.depth.size(); ++i) ASSERT_NEAR(da.depth[i], db.depth[i], 1e-9) << i;
}

TEST(Edges, MatchBruteForceOracleOnRenderedScene) {
  SphereFixture f(128);
  const DepthMap d = render_depth(f.frame, f.bodies, f.camera);
  for (double threshold : {0.01, 0.05, 1.0}) {
    const EdgeMap e = render_edges(d, threshold);
    EXPECT_EQ(e.value, edge_oracle(d, threshold).value) << threshold;
  }
  // The silhouette is a closed ring: some edges, far fewer than pixels.
  const EdgeMap e = render_edges(d, 0.05);
  const auto count = std::count(e.value.begin(), e.value.end(), 1);
  EXPECT_GT(count, 100);
  EXPECT_LT(count, 128 * 128 / 4);
}

TEST(EdgesProperty, MatchBruteForceOracleOnRandomMaps) {
  for (int trial = 0; trial < 20; ++trial) {
    Gen gen(testing::seed_for(trial));
    DepthMap d;
    d.width = d.height = 128;
    d.near = 0.1;
    d.far = 10;
    d.depth.resize(128 * 128);
    // Piecewise-constant blocks with noise so both branches are common.
    const int block = gen.integer(1, 16);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) d.depth[y * 128 + x] = 1.0 + ((x / block + y / block) % 3) + gen.uniform(0, 0.02);
    const double threshold = gen.uniform(0.005, 1.5);
    ASSERT_EQ(render_edges(d, threshold).value, edge_oracle(d, threshold).value) << "trial " << trial;
  }
}

TEST(Pgm, RoundTripsAndRejectsGarbage) {
  SphereFixture f(32);
  const DepthMap d = render_depth(f.frame, f.bodies, f.camera);
  const std::string bytes = encode_depth_pgm(d);
  EXPECT_EQ(bytes.substr(0, 13), "P5\n32 32\n6553");
  const Pgm p = decode_pgm(bytes);
  EXPECT_EQ(p.width, 32);
  EXPECT_EQ(p.maxval, 65535);
  EXPECT_EQ(p.values[0], 65535);  // empty pixel at far
  const Pgm e = decode_pgm(encode_edge_pgm(render_edges(d, 0.05)));
  EXPECT_EQ(e.maxval, 255);
  for (auto v : e.values) EXPECT_TRUE(v == 0 || v == 255);

  EXPECT_ERROR_CODE(decode_pgm("P2\n2 2\n255\n0000"), ErrorCode::MalformedRecord);
  EXPECT_ERROR_CODE(decode_pgm(bytes.substr(0, bytes.size() - 1)), ErrorCode::MalformedRecord);
  EXPECT_ERROR_CODE(decode_pgm(""), ErrorCode::MalformedRecord);
}

TEST(Camera, ValidationAndDefaults) {
  Camera c;
  c.look_at = c.position;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::DegenerateCamera);
  c = Camera{};
  c.up = Vec3(0, 1, 0);  // parallel to the view direction
  EXPECT_ERROR_CODE(validate(c), ErrorCode::DegenerateCamera);
  c = Camera{};
  c.fov_deg = 180;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ParameterOutOfRange);
  c = Camera{};
  c.width = 4;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ParameterOutOfRange);
  c = Camera{};
  c.far = c.near;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ParameterOutOfRange);
  EXPECT_NO_THROW(validate(default_camera(Vec3(1, 2, 3), 0.5)));
  const Camera d = default_camera(Vec3::Zero(), 2.0, 64, 48);
  EXPECT_NEAR((d.position - d.look_at).norm(), 5.0, 1e-12);
  EXPECT_EQ(d.width, 64);
  EXPECT_ERROR_CODE(render_edges(DepthMap{}, 0.0), ErrorCode::ParameterOutOfRange);
}

TEST(Bodies, FromSceneFollowsWorldOrder) {
  const scene::Scene s = scene::load(std::string(SKETCHPLAY_TEST_DIR) + "/fixtures/scenes/pinned_cloth.json");
  const auto bodies = render_bodies(s);
  ASSERT_EQ(bodies.size(), 3u);
  EXPECT_EQ(bodies[0].id, "floor-block");
  EXPECT_TRUE(bodies[1].deformable);
  EXPECT_EQ(bodies[2].triangles.size(), 2u * 7 * 7);

  // A frame from a decoded log has no node data: deformables are skipped.
  physics::World w = scene::build_world(s);
  physics::Frame frame = physics::snapshot(w);
  const Camera cam = default_camera(Vec3(0.2, 0, 0.5), 0.8, 64, 64);
  const DepthMap full = render_depth(frame, bodies, cam);
  frame.deformable_nodes.clear();
  const DepthMap rigid_only = render_depth(frame, bodies, cam);
  EXPECT_LT(std::count(full.depth.begin(), full.depth.end(), cam.far),
            std::count(rigid_only.depth.begin(), rigid_only.depth.end(), cam.far));
}

TEST(Files, NamesArePaddedFrameNumbers) {
  EXPECT_EQ(depth_file_name(0), "depth_000000.pgm");
  EXPECT_EQ(edge_file_name(1234), "edge_001234.pgm");
}

}  // namespace
}  // namespace sketchplay::priors
