#pragma once

#include "sketchplay/core.hpp"
#include "sketchplay/physics/collision.hpp"
#include "sketchplay/physics/shapes.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sketchplay::physics {

inline constexpr double kDefaultDt = 1.0 / 240.0;
inline constexpr int kDefaultSolverIterations = 8;
inline constexpr double kPenetrationSlop = 1e-4;       // m
inline constexpr double kPositionCorrectionFactor = 0.2;
inline constexpr double kRestitutionThreshold = 0.2;   // m/s, approach speed
inline constexpr double kBlowupLimit = 1e6;            // m

struct RigidBody {
  std::string id;
  Shape shape = Sphere{};
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();  // body frame, about the center of mass
  double friction = 0.5;
  double restitution = 0.0;
  bool is_static = false;

  // Fills mass and inertia from a density-free shape description.
  static RigidBody make(std::string id, Shape shape, double mass, const Vec3& position,
                        const Quat& orientation = Quat::Identity());
};

struct SpringNode {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double mass = 1.0;
  bool pinned = false;
};

struct Spring {
  int a = 0;
  int b = 0;
  double stiffness = 0.0;    // N/m
  double rest_length = 0.0;  // m
  double damping = 0.0;      // N s/m
};

struct SpringStiffness {
  double k_structural = 0.0;
  double k_shear = 0.0;
  double damping = 0.0;
};

// First-order cubic-lattice mapping from continuum moduli to springs:
// k_structural = E * spacing, k_shear = k_structural * nu / (1 - nu),
// damping = 0.1 * sqrt(k_structural * node_mass). Not exact elasticity.
SpringStiffness springs_from_elastic_moduli(double elastic_modulus, double poisson_nu,
                                            double lattice_spacing, double node_mass);

struct SoftBody {
  std::string id;
  std::vector<SpringNode> nodes;
  std::vector<Spring> springs;
  std::vector<std::array<int, 3>> surface;  // triangles for rendering
  double friction = 0.5;
  double restitution = 0.0;
  double air_damping = 0.0;  // 1/s, drag force = -air_damping * m * v
};

struct Cloth {
  std::string id;
  int rows = 2;
  int cols = 2;
  std::vector<SpringNode> nodes;  // row-major
  std::vector<Spring> springs;
  double friction = 0.5;
  double thickness = 1e-3;
  double air_damping = 2.0;

  int node_index(int r, int c) const { return r * cols + c; }
};

struct ElasticParameters {
  double density = 1000.0;
  double elastic_modulus = 1e7;
  double poisson_nu = 0.3;
  double friction = 0.5;
  double restitution = 0.0;
};

// Lattice-filled soft body approximating a box or prism placed at `position`
// with `orientation`. Total node mass equals density * shape volume.
SoftBody make_soft_body(std::string id, const Shape& shape, const Vec3& position,
                        const Quat& orientation, double lattice_spacing,
                        const ElasticParameters& params);

// Rectangular cloth whose first row runs along `u_axis` and whose rows
// advance along `v_axis`, starting at `origin`.
Cloth make_cloth(std::string id, int rows, int cols, double spacing, const Vec3& origin,
                 const Vec3& u_axis, const Vec3& v_axis, double thickness,
                 const ElasticParameters& params,
                 const std::vector<std::pair<int, int>>& pinned);

struct GroundPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  double friction = 0.5;
  double restitution = 0.0;
};

// Contact impulses accumulated in the previous step. Reapplied at the start
// of the next step so resting stacks converge within the iteration budget.
struct CachedImpulse {
  int a = -1;  // rigid body index, -1 for the ground
  int b = -1;
  Vec3 local_point = Vec3::Zero();  // in body b's frame
  double normal = 0.0;
  Vec3 friction = Vec3::Zero();     // world-frame tangential impulse
};

struct World {
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double dt = kDefaultDt;
  int solver_iterations = kDefaultSolverIterations;
  std::vector<RigidBody> rigid_bodies;
  std::vector<SoftBody> soft_bodies;
  std::vector<Cloth> cloths;
  std::optional<GroundPlane> ground = GroundPlane{};
  std::uint64_t rng_seed = 0;  // reserved; the core is deterministic
  std::int64_t step_index = 0;
  std::vector<CachedImpulse> warm_start;

  std::size_t body_count() const {
    return rigid_bodies.size() + soft_bodies.size() + cloths.size();
  }
};

struct BodySnapshot {
  std::string id;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

struct ContactRecord {
  std::string body_a;  // "ground" for the static plane
  std::string body_b;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double impulse = 0.0;
};

struct Frame {
  std::int64_t index = 0;
  double time = 0.0;
  std::vector<BodySnapshot> bodies;  // rigid, then soft, then cloth
  std::vector<ContactRecord> contacts;
  // Node positions of each soft body then each cloth, for rendering.
  std::vector<std::vector<Vec3>> deformable_nodes;
};

// Throws ParameterOutOfRange if dt, iteration count or any body is invalid.
void validate(const World& world);

// Snapshot of the current state (index = world.step_index).
Frame snapshot(const World& world);

// Advances the world by one dt in place and returns the resulting frame.
Frame step(World& world);

// Runs floor(duration / dt) steps. Throws NumericalBlowup on divergence.
std::vector<Frame> simulate(World& world, double duration);

std::size_t step_count(double duration, double dt);

void apply_gesture_impulse(World& world, const std::string& body_id, const Vec3& v_obj);

// Diagnostics used by tests and acceptance checks.
double kinetic_energy(const World& world);
double mechanical_energy(const World& world);
Vec3 linear_momentum(const World& world);

}  // namespace sketchplay::physics
