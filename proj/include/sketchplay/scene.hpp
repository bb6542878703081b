#pragma once

#include "sketchplay/physics/world.hpp"
#include "sketchplay/recognition.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

// The assembled, simulation-ready scene shared by the CLI, the service, the
// script emitter and the prior renderer. World frame: z up, ground at z = 0.
namespace sketchplay::scene {

enum class BodyKind { Rigid, Soft, Cloth };

std::string_view to_string(BodyKind kind);
std::optional<BodyKind> body_kind_from_string(std::string_view name);

struct GestureRecord {
  Vec3 v_hand = Vec3::Zero();
  double m_hand = recognition::kDefaultHandMass;
  double alpha_material = 1.0;
};

// Rectangular cloth in the body's local xy-plane, centered on the body
// position. Row 0 runs along local +x at the local +y edge; rows advance
// toward local -y.
struct ClothGrid {
  int rows = 2;
  int cols = 2;
  double spacing = 0.05;     // m
  double thickness = 1e-3;   // m
  std::vector<std::pair<int, int>> pinned;
};

struct SceneObject {
  std::string id;
  BodyKind kind = BodyKind::Rigid;
  physics::Shape shape = physics::Sphere{};  // rigid and soft bodies
  ClothGrid cloth;                           // cloth only
  double lattice_spacing = 0.02;             // soft only, m
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  recognition::MaterialProfile profile;
  recognition::MassEstimate mass;
  Vec3 velocity = Vec3::Zero();  // v_obj, injected at frame 0
  std::optional<GestureRecord> gesture;
  bool is_static = false;
};

struct Environment {
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  bool ground = true;
  double dt = physics::kDefaultDt;
  int solver_iterations = physics::kDefaultSolverIterations;
  double fps = 24.0;
  double duration = 2.0;  // s

  // Output frames at fps covering [0, duration], counting the initial state.
  int frame_count() const;
};

struct Metadata {
  std::string generator;
  std::map<std::string, std::string> input_hashes;  // name -> sha256 hex
};

struct Scene {
  Environment environment;
  std::vector<SceneObject> objects;
  Metadata metadata;
};

// Rounds a value to 9 significant decimal digits, so printing it with 9
// digits and parsing it back is lossless.
double quantize9(double value);

// Quantizes the values the script round-trips: profile, mass, velocity.
void quantize_properties(SceneObject& object);

// Throws ParameterOutOfRange / InvalidConfig on duplicate ids, bad profiles,
// non-positive mass or an invalid cloth grid.
void validate(const Scene& scene);

// Objects in id order; all consumers iterate in this order.
std::vector<const SceneObject*> sorted_objects(const Scene& scene);

physics::World build_world(const Scene& scene);

// Scene JSON. Reading resolves missing profiles from `table` and missing
// masses from density * volume.
std::string to_json_text(const Scene& scene);
Scene from_json_text(const std::string& text,
                     const recognition::MaterialTable& table = recognition::MaterialTable::builtin());
Scene load(const std::string& path,
           const recognition::MaterialTable& table = recognition::MaterialTable::builtin());

// Object ids in world body order: rigid, then soft, then cloth, each by id.
std::vector<std::string> body_order(const Scene& scene);

// Sphere enclosing every object at its initial pose.
void bounding_sphere(const Scene& scene, Vec3* center, double* radius);

}  // namespace sketchplay::scene
