#pragma once

#include "sketchplay/physics/world.hpp"
#include "sketchplay/priors.hpp"
#include "sketchplay/recognition.hpp"
#include "sketchplay/scene.hpp"
#include "sketchplay/sketch.hpp"
#include "sketchplay/trajectory.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Canvas + gestures -> scene -> frames, script and priors. The CLI and the
// service both go through here, so equal inputs give equal bytes.
//
// Canvas coordinates are meters with y up. A canvas point (x, y) maps to
// world (x, 0, y): the sketch stands on the ground plane z = 0 and solids
// are extruded along world -y, centered on y = 0.
namespace sketchplay::pipeline {

enum class Backend { Rule, Remote, Auto };  // Auto: remote iff an endpoint is configured
enum class VelocitySource { Release, Mean, Peak };

// Every knob that influences the produced bytes.
struct Settings {
  std::optional<std::string> prompt;
  double m_hand = recognition::kDefaultHandMass;
  double dt = physics::kDefaultDt;
  int solver_iterations = physics::kDefaultSolverIterations;
  double duration = 2.0;
  double fps = 24.0;
  bool ground = true;
  Backend backend = Backend::Auto;
  std::optional<double> thickness;  // default: 0.2 * min bbox side per object
  bool fit_primitives = true;
  double beautify_epsilon = 0.0;  // 0 keeps strokes as drawn
  double temporal_gap = sketch::kDefaultTemporalGap;
  double spatial_gap_fraction = sketch::kDefaultSpatialGapFraction;
  double release_window = 0.1;
  VelocitySource velocity_source = VelocitySource::Release;
  double cloth_spacing = 0.0;  // 0: longest side / 15
  double cloth_thickness = 1e-3;
  int prior_stride = 10;  // simulation steps per rendered frame
  int prior_width = 512;
  int prior_height = 512;
  double edge_threshold = 0.01;
  bool prior_ground = false;
  double async_threshold = 10.0;  // service: longer runs go to a background job
};

struct PipelineConfig {
  std::string canvas_path;
  std::optional<std::string> gestures_path;
  std::optional<std::string> material_table_path;
  std::optional<std::string> exemplars_path;
  std::string output_dir = "out";
  Settings settings;
};

// JSON config with snake_case keys; relative paths resolve against the
// config file's directory. Unknown keys are rejected. Throws InvalidConfig.
PipelineConfig load_config(const std::string& path);
void apply_config_json(PipelineConfig& config, const std::string& json_text,
                       const std::string& base_dir = "");
void apply_settings_json(Settings& settings, const std::string& json_text);
std::string settings_to_json(const Settings& settings);
void validate(const Settings& settings);

struct GestureBinding {
  std::string object_id;
  trajectory::Stroke stroke;
  std::optional<double> m_hand;
  std::optional<double> alpha;
};

struct Inputs {
  sketch::SketchCanvas canvas;
  std::vector<GestureBinding> gestures;
  recognition::MaterialTable table = recognition::MaterialTable::builtin();
  std::vector<recognition::Exemplar> exemplars = recognition::builtin_exemplars();
};

// Canvas JSON: {"extent": [w, h], "strokes": [[{"t", "x", "y"}, ...], ...]}.
sketch::SketchCanvas parse_canvas(const std::string& json_text);
std::string canvas_to_json(const sketch::SketchCanvas& canvas);
// Stroke points as [{"t", "x", "y"}, ...]; throws MalformedStroke.
trajectory::Stroke parse_stroke_points(const std::string& json_text);

// Gestures JSON: {"gestures": [{"object", "stroke": [...], "m_hand"?, "alpha"?}]}.
std::vector<GestureBinding> parse_gestures(const std::string& json_text);
std::string gestures_to_json(const std::vector<GestureBinding>& gestures);

Inputs load_inputs(const PipelineConfig& config);

struct TransferResult {
  trajectory::GestureSummary summary;
  Vec3 v_hand = Vec3::Zero();  // world frame
  double m_hand = 0.0;
  double m_obj = 0.0;
  double alpha = 0.0;
  Vec3 v_obj = Vec3::Zero();  // world frame
};

// Gesture stroke (canvas frame) -> kinematics -> summary -> transfer.
TransferResult transfer_gesture(const trajectory::Stroke& stroke, double m_obj,
                                const recognition::MaterialProfile& profile,
                                const Settings& settings, std::optional<double> m_hand = {},
                                std::optional<double> alpha = {});

Vec3 canvas_to_world(const Vec2& p);
Vec3 canvas_velocity_to_world(const Vec3& v);

struct ObjectReport {
  std::string id;
  recognition::Provenance provenance = recognition::Provenance::RuleBased;
  double confidence = 1.0;
  std::string diagnostic;
};

struct BuiltScene {
  scene::Scene scene;
  std::vector<ObjectReport> reports;  // id order
};

BuiltScene build_scene(const Inputs& inputs, const Settings& settings,
                       const recognition::EndpointConfig& endpoint);

struct Artifacts {
  std::string scene_json;
  std::string frame_log;
  std::string script;
  std::string report_json;
  std::vector<std::pair<std::string, std::string>> priors;  // file name -> bytes
  std::size_t frame_count = 0;
};

// Depth and edge maps for the initial state and every `prior_stride`-th
// frame after it; file k shows simulation step k * prior_stride.
std::vector<std::pair<std::string, std::string>> render_prior_files(
    const scene::Scene& scene, const physics::Frame& initial, const std::vector<physics::Frame>& frames,
    const Settings& settings);

// Simulates, renders priors and emits the script. Throws NumericalBlowup.
Artifacts produce_artifacts(const BuiltScene& built, const Settings& settings);

// Writes scene.json, frames.spf, scene_script.py, report.json and priors/.
void write_artifacts(const Artifacts& artifacts, const std::string& output_dir);

// Exit codes: 0 ok, 2 validation or input error, 3 numerical blowup.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitBlowup = 3;
int run(const PipelineConfig& config, std::ostream& log);

std::string sha256_hex(std::string_view bytes);

// Deterministic ustar archive (mtime 0, mode 0644, no owner names).
std::string make_tar(const std::vector<std::pair<std::string, std::string>>& files);

}  // namespace sketchplay::pipeline
