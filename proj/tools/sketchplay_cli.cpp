#include "sketchplay/emitter/emitter.hpp"
#include "sketchplay/physics/frame_log.hpp"
#include "sketchplay/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <sstream>

namespace {

namespace fs = std::filesystem;
namespace pipeline = sketchplay::pipeline;
using nlohmann::json;
using sketchplay::Error;
using sketchplay::ErrorCode;

enum class Kind { Text, Number, Flag };

struct FlagSpec {
  const char* flag;
  const char* key;  // config JSON key
  Kind kind;
  const char* help;
};

// Every flag mirrors a config key, so a flag and a config entry are
// interchangeable and defaults live in one place.
constexpr FlagSpec kSettingFlags[] = {
    {"--prompt", "prompt", Kind::Text, "Text hint for material inference"},
    {"--m-hand", "m_hand", Kind::Number, "Hand mass in kg"},
    {"--dt", "dt", Kind::Number, "Simulation step in seconds"},
    {"--solver-iterations", "solver_iterations", Kind::Number, "Contact solver iterations"},
    {"--duration", "duration", Kind::Number, "Simulated seconds"},
    {"--fps", "fps", Kind::Number, "Scene frame rate"},
    {"--ground", "ground", Kind::Flag, "Ground plane at z = 0 (true/false)"},
    {"--backend", "backend", Kind::Text, "Material inference: rule, remote or auto"},
    {"--thickness", "thickness", Kind::Number, "Extrusion depth in meters (default per object)"},
    {"--fit-primitives", "fit_primitives", Kind::Flag, "Fit spheres and boxes (true/false)"},
    {"--beautify-epsilon", "beautify_epsilon", Kind::Number, "Stroke simplification tolerance, 0 = off"},
    {"--temporal-gap", "temporal_gap", Kind::Number, "Seconds between strokes that start a new object"},
    {"--spatial-gap-fraction", "spatial_gap_fraction", Kind::Number, "Gap as a fraction of the canvas diagonal"},
    {"--release-window", "release_window", Kind::Number, "Seconds averaged for the release velocity"},
    {"--velocity-source", "velocity_source", Kind::Text, "Gesture velocity: release, mean or peak"},
    {"--cloth-spacing", "cloth_spacing", Kind::Number, "Cloth node spacing, 0 = auto"},
    {"--cloth-thickness", "cloth_thickness", Kind::Number, "Cloth sheet thickness in meters"},
    {"--prior-stride", "prior_stride", Kind::Number, "Simulation steps per prior frame"},
    {"--prior-width", "prior_width", Kind::Number, "Prior image width"},
    {"--prior-height", "prior_height", Kind::Number, "Prior image height"},
    {"--edge-threshold", "edge_threshold", Kind::Number, "Depth jump in meters that marks an edge"},
    {"--prior-ground", "prior_ground", Kind::Flag, "Draw the ground in priors (true/false)"},
};

constexpr FlagSpec kPathFlags[] = {
    {"--canvas", "canvas", Kind::Text, "Canvas JSON"},
    {"--gestures", "gestures", Kind::Text, "Gestures JSON"},
    {"--material-table", "material_table", Kind::Text, "Material table JSON"},
    {"--exemplars", "exemplars", Kind::Text, "Few-shot exemplars JSON"},
    {"--output-dir", "output_dir", Kind::Text, "Output directory"},
};

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> raw;  // config key -> flag text

  void add(CLI::App& app, const FlagSpec& spec) {
    app.add_option_function<std::string>(
        spec.flag, [this, key = spec.key](const std::string& v) { raw[key] = v; }, spec.help);
  }

  json to_json(std::span<const FlagSpec> specs) const {
    json out = json::object();
    for (const auto& spec : specs) {
      const auto it = raw.find(spec.key);
      if (it == raw.end()) continue;
      switch (spec.kind) {
        case Kind::Text: out[spec.key] = it->second; break;
        case Kind::Number: {
          json n = json::parse(it->second, nullptr, false);
          if (n.is_discarded() || !n.is_number()) {
            throw Error(ErrorCode::InvalidConfig, std::string(spec.flag) + " expects a number");
          }
          out[spec.key] = n;
          break;
        }
        case Kind::Flag:
          if (it->second != "true" && it->second != "false") {
            throw Error(ErrorCode::InvalidConfig, std::string(spec.flag) + " expects true or false");
          }
          out[spec.key] = it->second == "true";
          break;
      }
    }
    return out;
  }

  // Config file first, flags on top. Flag paths are relative to the cwd.
  pipeline::PipelineConfig resolve() const {
    pipeline::PipelineConfig config;
    if (!config_path.empty()) config = pipeline::load_config(config_path);
    json flags = to_json(kSettingFlags);
    flags.update(to_json(kPathFlags));
    pipeline::apply_config_json(config, flags.dump());
    return config;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

json vec_json(const sketchplay::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

int cmd_kinematics(const std::string& path, const std::string& scheme, std::optional<double> smoothing,
                   std::size_t keypoint) {
  namespace tr = sketchplay::trajectory;
  const std::string text = read_file(path);
  // Keypoint streams carry a "points" array per line; strokes carry x/y.
  const bool keypoints = text.find("\"points\"") != std::string::npos;
  const tr::Stroke stroke =
      keypoints ? tr::extract_fingertip_stroke(tr::ingest_keypoint_stream(text), keypoint) : tr::ingest_stroke_stream(text);
  tr::validate_stroke(stroke);
  tr::KinematicsOptions options;
  if (scheme == "central") options.scheme = tr::DifferenceScheme::Central;
  else if (scheme != "backward") throw Error(ErrorCode::InvalidConfig, "--scheme must be backward or central");
  options.smoothing = smoothing;
  for (const auto& s : tr::estimate_kinematics(stroke, options)) {
    std::cout << json{{"t", s.t},
                      {"speed", s.speed},
                      {"velocity", vec_json(s.velocity)},
                      {"direction", vec_json(s.direction)},
                      {"stationary", s.stationary}}
                     .dump()
              << "\n";
  }
  return pipeline::kExitOk;
}

int cmd_emit_script(const std::string& scene_path, const std::string& table_path, const std::string& output) {
  const auto table = table_path.empty() ? sketchplay::recognition::MaterialTable::builtin()
                                        : sketchplay::recognition::MaterialTable::load(table_path);
  const auto scene = sketchplay::scene::load(scene_path, table);
  const std::string text = sketchplay::emitter::emit_script(scene).text;
  if (output.empty() || output == "-") std::cout << text;
  else write_file(output, text);
  return pipeline::kExitOk;
}

int cmd_render_priors(const std::string& scene_path, const std::string& frames_path, const Overrides& overrides) {
  const pipeline::PipelineConfig config = overrides.resolve();
  const auto table = config.material_table_path ? sketchplay::recognition::MaterialTable::load(*config.material_table_path)
                                                : sketchplay::recognition::MaterialTable::builtin();
  const auto scene = sketchplay::scene::load(scene_path, table);
  auto world = sketchplay::scene::build_world(scene);
  const auto initial = sketchplay::physics::snapshot(world);
  std::vector<sketchplay::physics::Frame> frames;
  if (frames_path.empty()) {
    frames = sketchplay::physics::simulate(world, scene.environment.duration);
  } else {
    const auto log = sketchplay::physics::decode_frame_log(read_file(frames_path));
    if (log.body_count != world.body_count()) {
      throw Error(ErrorCode::MalformedRecord, "frame log has " + std::to_string(log.body_count) +
                                                  " bodies, scene has " + std::to_string(world.body_count()));
    }
    for (std::size_t i = 0; i < log.frames.size(); ++i) {
      sketchplay::physics::Frame f;
      f.index = static_cast<std::int64_t>(i) + 1;
      f.time = static_cast<double>(f.index) * log.dt;
      f.bodies = log.frames[i];
      frames.push_back(std::move(f));
    }
  }
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto files = pipeline::render_prior_files(scene, initial, frames, config.settings);
  for (const auto& [name, bytes] : files) write_file(dir / name, bytes);
  std::cerr << "wrote " << files.size() / 2 << " prior frames to " << dir.string() << "\n";
  return pipeline::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch-and-gesture physics scene authoring"};
  app.require_subcommand(1);

  Overrides run_flags;
  auto* run = app.add_subcommand("run", "Canvas and gestures to scene, frames, script and priors");
  run->add_option("--config", run_flags.config_path, "JSON config; flags override its entries")->check(CLI::ExistingFile);
  for (const auto& spec : kPathFlags) run_flags.add(*run, spec);
  for (const auto& spec : kSettingFlags) run_flags.add(*run, spec);

  std::string kin_path, scheme = "backward";
  std::optional<double> smoothing;
  std::size_t keypoint = sketchplay::trajectory::kDefaultKeypoint;
  auto* kin = app.add_subcommand("kinematics", "Per-sample speed and direction of a stroke as JSON lines");
  kin->add_option("path", kin_path, "Stroke or keypoint JSON Lines file")->required();
  kin->add_option("--scheme", scheme, "Finite differences: backward or central");
  kin->add_option("--smoothing", smoothing, "Exponential smoothing coefficient in (0, 1]");
  kin->add_option("--keypoint", keypoint, "Keypoint index for keypoint streams");

  std::string emit_scene, emit_table, emit_out;
  auto* emit = app.add_subcommand("emit-script", "Scene JSON to a Blender script");
  emit->add_option("scene", emit_scene, "Scene JSON")->required();
  emit->add_option("--material-table", emit_table, "Material table JSON for missing profiles");
  emit->add_option("-o,--output", emit_out, "Output file (default stdout)");

  Overrides prior_flags;
  std::string prior_scene, prior_frames;
  auto* priors = app.add_subcommand("render-priors", "Depth and edge maps for a scene");
  priors->add_option("scene", prior_scene, "Scene JSON")->required();
  priors->add_option("--frames", prior_frames, "Frame log to render instead of simulating");
  priors->add_option("--config", prior_flags.config_path, "JSON config; flags override its entries")
      ->check(CLI::ExistingFile);
  for (const auto& spec : kPathFlags) prior_flags.add(*priors, spec);
  for (const auto& spec : kSettingFlags) prior_flags.add(*priors, spec);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pipeline::kExitInvalid;
  }

  try {
    if (*run) return pipeline::run(run_flags.resolve(), std::cerr);
    if (*kin) return cmd_kinematics(kin_path, scheme, smoothing, keypoint);
    if (*emit) return cmd_emit_script(emit_scene, emit_table, emit_out);
    if (*priors) return cmd_render_priors(prior_scene, prior_frames, prior_flags);
  } catch (const sketchplay::NumericalBlowup& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pipeline::kExitBlowup;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pipeline::kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pipeline::kExitInvalid;
  }
  return pipeline::kExitInvalid;
}
