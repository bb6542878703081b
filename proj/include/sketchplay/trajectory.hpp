#pragma once

#include "sketchplay/core.hpp"

#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <string_view>
#include <vector>

namespace sketchplay::trajectory {

inline constexpr std::size_t kKeypointCount = 21;
inline constexpr std::size_t kDefaultKeypoint = 8;  // index fingertip
inline constexpr double kStationaryThreshold = 1e-6;  // meters
inline constexpr double kMinTimestep = 1e-9;          // seconds

struct KeypointFrame {
  double t = 0.0;
  std::array<Vec3, kKeypointCount> points;
};

struct TimedPoint {
  double t = 0.0;
  Vec3 pos = Vec3::Zero();

  bool operator==(const TimedPoint&) const = default;
};

// A timestamped polyline. 2D input is embedded with z = 0.
struct Stroke {
  std::vector<TimedPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  double start_time() const { return points.front().t; }
  double end_time() const { return points.back().t; }
};

struct KinematicSample {
  double t = 0.0;
  Vec3 velocity = Vec3::Zero();
  double speed = 0.0;
  Vec3 direction = Vec3::Zero();
  bool stationary = false;
};

struct GestureSummary {
  double duration = 0.0;
  double mean_speed = 0.0;
  double peak_speed = 0.0;
  Vec3 principal_direction = Vec3::Zero();
  bool direction_defined = false;
  Vec3 release_velocity = Vec3::Zero();
};

enum class DifferenceScheme {
  // Backward-difference velocity, forward-difference tangent.
  BackwardVelocityForwardTangent,
  // Central differences for both; one-sided at the ends.
  Central,
};

struct KinematicsOptions {
  DifferenceScheme scheme = DifferenceScheme::BackwardVelocityForwardTangent;
  // Exponential smoothing coefficient applied to velocity; disabled when empty.
  std::optional<double> smoothing;
};

// JSON Lines readers. Blank lines are ignored.
std::vector<KeypointFrame> ingest_keypoint_stream(std::istream& in);
std::vector<KeypointFrame> ingest_keypoint_stream(std::string_view text);

// Reads `{"t","x","y"}` records into a stroke (z = 0). No minimum length is
// enforced here; callers validate.
Stroke ingest_stroke_stream(std::istream& in);
Stroke ingest_stroke_stream(std::string_view text);

// Throws TooFewPoints / NonMonotonicTime / MalformedRecord.
void validate_stroke(const Stroke& stroke);

Stroke extract_fingertip_stroke(const std::vector<KeypointFrame>& frames,
                                std::size_t keypoint_index = kDefaultKeypoint);

Stroke resample_stroke(const Stroke& stroke, double rate_hz);

std::vector<KinematicSample> estimate_kinematics(
    const Stroke& stroke, const KinematicsOptions& options = {});

GestureSummary summarize_gesture(const std::vector<KinematicSample>& samples,
                                 double release_window);

}  // namespace sketchplay::trajectory
