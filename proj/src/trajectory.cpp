#include "sketchplay/trajectory.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace sketchplay::trajectory {

namespace {

using nlohmann::json;

double finite_number(const json& value, std::size_t line_no) {
  if (!value.is_number()) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": expected a number");
  }
  const double x = value.get<double>();
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": non-finite number");
  }
  return x;
}

json parse_line(const std::string& line, std::size_t line_no) {
  json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (record.is_discarded() || !record.is_object()) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": not a JSON object");
  }
  if (!record.contains("t")) {
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line_no) + ": missing \"t\"");
  }
  return record;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

void check_time_order(double prev, double t, std::size_t line_no) {
  if (!(t > prev)) {
    throw Error(ErrorCode::NonMonotonicTime,
                "line " + std::to_string(line_no) + ": t=" + std::to_string(t) +
                    " does not follow " + std::to_string(prev));
  }
}

Vec3 lerp(const Vec3& a, const Vec3& b, double u) { return a + u * (b - a); }

}  // namespace

std::vector<KeypointFrame> ingest_keypoint_stream(std::istream& in) {
  std::vector<KeypointFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json record = parse_line(line, line_no);
    KeypointFrame frame;
    frame.t = finite_number(record["t"], line_no);
    if (frame.t < 0.0) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": negative timestamp");
    }
    const auto it = record.find("points");
    if (it == record.end() || !it->is_array() || it->size() != kKeypointCount) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": expected exactly 21 points");
    }
    for (std::size_t k = 0; k < kKeypointCount; ++k) {
      const json& p = (*it)[k];
      if (!p.is_array() || p.size() != 3) {
        throw Error(ErrorCode::MalformedRecord,
                    "line " + std::to_string(line_no) + ": point " +
                        std::to_string(k) + " is not [x,y,z]");
      }
      frame.points[k] = Vec3(finite_number(p[0], line_no), finite_number(p[1], line_no),
                             finite_number(p[2], line_no));
    }
    if (!frames.empty()) check_time_order(frames.back().t, frame.t, line_no);
    frames.push_back(frame);
  }
  return frames;
}

std::vector<KeypointFrame> ingest_keypoint_stream(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ingest_keypoint_stream(in);
}

Stroke ingest_stroke_stream(std::istream& in) {
  Stroke stroke;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json record = parse_line(line, line_no);
    if (!record.contains("x") || !record.contains("y")) {
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line_no) + ": missing \"x\"/\"y\"");
    }
    TimedPoint p;
    p.t = finite_number(record["t"], line_no);
    p.pos = Vec3(finite_number(record["x"], line_no), finite_number(record["y"], line_no), 0.0);
    if (!stroke.empty()) check_time_order(stroke.points.back().t, p.t, line_no);
    stroke.points.push_back(p);
  }
  return stroke;
}

Stroke ingest_stroke_stream(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ingest_stroke_stream(in);
}

void validate_stroke(const Stroke& stroke) {
  if (stroke.size() < 2) {
    throw Error(ErrorCode::TooFewPoints,
                "stroke has " + std::to_string(stroke.size()) + " point(s), need 2");
  }
  for (std::size_t i = 0; i < stroke.size(); ++i) {
    const auto& p = stroke.points[i];
    if (!std::isfinite(p.t) || !all_finite(p.pos)) {
      throw Error(ErrorCode::MalformedRecord, "non-finite value at point " + std::to_string(i));
    }
    if (i > 0 && !(p.t > stroke.points[i - 1].t)) {
      throw Error(ErrorCode::NonMonotonicTime,
                  "timestamps not strictly increasing at point " + std::to_string(i));
    }
  }
}

Stroke extract_fingertip_stroke(const std::vector<KeypointFrame>& frames,
                                std::size_t keypoint_index) {
  if (keypoint_index >= kKeypointCount) {
    throw Error(ErrorCode::IndexOutOfRange,
                "keypoint index " + std::to_string(keypoint_index) + " not in [0, 21)");
  }
  if (frames.size() < 2) {
    throw Error(ErrorCode::TooFewFrames,
                std::to_string(frames.size()) + " frame(s), need at least 2");
  }
  Stroke stroke;
  stroke.points.reserve(frames.size());
  for (const auto& f : frames) stroke.points.push_back({f.t, f.points[keypoint_index]});
  return stroke;
}

Stroke resample_stroke(const Stroke& stroke, double rate_hz) {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw Error(ErrorCode::ParameterOutOfRange, "rate_hz must be positive");
  }
  validate_stroke(stroke);

  const auto& in = stroke.points;
  const double t0 = in.front().t;
  const double t_end = in.back().t;
  // Grid times within this distance of an input timestamp reuse that sample
  // verbatim, so resampling at the native rate is the identity.
  const double snap = 1e-9;

  Stroke out;
  std::size_t seg = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) / rate_hz;
    if (t > t_end + snap) break;
    while (seg + 1 < in.size() && in[seg + 1].t <= t) ++seg;
    // seg is the last input index with in[seg].t <= t (or the final one).
    if (std::abs(in[seg].t - t) <= snap) {
      out.points.push_back(in[seg]);
    } else if (seg + 1 < in.size() && std::abs(in[seg + 1].t - t) <= snap) {
      out.points.push_back(in[seg + 1]);
    } else if (seg + 1 < in.size()) {
      const double u = (t - in[seg].t) / (in[seg + 1].t - in[seg].t);
      out.points.push_back({t, lerp(in[seg].pos, in[seg + 1].pos, u)});
    } else {
      break;
    }
  }
  if (out.points.back().t < t_end) out.points.push_back(in.back());
  return out;
}

std::vector<KinematicSample> estimate_kinematics(const Stroke& stroke,
                                                 const KinematicsOptions& options) {
  validate_stroke(stroke);
  const auto& p = stroke.points;
  const std::size_t n = p.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (p[i].t - p[i - 1].t < kMinTimestep) {
      throw Error(ErrorCode::DegenerateTimestep,
                  "timestep below 1e-9 s at point " + std::to_string(i));
    }
  }
  if (options.smoothing && !(*options.smoothing > 0.0 && *options.smoothing <= 1.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "smoothing coefficient must be in (0, 1]");
  }

  auto diff = [&](std::size_t a, std::size_t b) -> Vec3 {
    return (p[b].pos - p[a].pos) / (p[b].t - p[a].t);
  };

  std::vector<KinematicSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    KinematicSample& s = samples[i];
    s.t = p[i].t;
    Vec3 tangent;
    if (options.scheme == DifferenceScheme::Central) {
      const std::size_t lo = i == 0 ? 0 : i - 1;
      const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
      s.velocity = diff(lo, hi);
      tangent = p[hi].pos - p[lo].pos;
    } else {
      s.velocity = i == 0 ? diff(0, 1) : diff(i - 1, i);
      tangent = i + 1 < n ? Vec3(p[i + 1].pos - p[i].pos) : Vec3(p[i].pos - p[i - 1].pos);
    }
    const double len = tangent.norm();
    if (len < kStationaryThreshold) {
      s.stationary = true;
      s.direction = Vec3::Zero();
    } else {
      s.direction = tangent / len;
    }
  }

  if (options.smoothing) {
    const double a = *options.smoothing;
    for (std::size_t i = 1; i < n; ++i) {
      samples[i].velocity = a * samples[i].velocity + (1.0 - a) * samples[i - 1].velocity;
    }
  }
  for (auto& s : samples) s.speed = s.velocity.norm();
  return samples;
}

GestureSummary summarize_gesture(const std::vector<KinematicSample>& samples,
                                 double release_window) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no kinematic samples");
  if (!(release_window > 0.0)) {
    throw Error(ErrorCode::ParameterOutOfRange, "release_window must be positive");
  }

  GestureSummary out;
  const std::size_t n = samples.size();
  out.duration = samples.back().t - samples.front().t;

  Vec3 dir_sum = Vec3::Zero();
  for (const auto& s : samples) {
    out.peak_speed = std::max(out.peak_speed, s.speed);
    if (!s.stationary) dir_sum += s.direction;
  }
  const double dir_norm = dir_sum.norm();
  if (dir_norm > 0.0) {
    out.principal_direction = dir_sum / dir_norm;
    out.direction_defined = true;
  }

  if (n == 1) {
    out.mean_speed = samples[0].speed;
    out.release_velocity = samples[0].velocity;
    return out;
  }

  // Sample i (i >= 1) holds the velocity over (t[i-1], t[i]]; integrate
  // piecewise-constant over the whole gesture and over the release window.
  const double t_end = samples.back().t;
  const double window_start = std::max(samples.front().t, t_end - release_window);
  double speed_integral = 0.0;
  Vec3 release_integral = Vec3::Zero();
  double release_time = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double a = samples[i - 1].t;
    const double b = samples[i].t;
    speed_integral += samples[i].speed * (b - a);
    const double overlap = b - std::max(a, window_start);
    if (overlap > 0.0) {
      release_integral += samples[i].velocity * overlap;
      release_time += overlap;
    }
  }
  out.mean_speed = std::min(speed_integral / out.duration, out.peak_speed);
  out.release_velocity = release_time > 0.0 ? Vec3(release_integral / release_time)
                                            : samples.back().velocity;
  return out;
}

}  // namespace sketchplay::trajectory
