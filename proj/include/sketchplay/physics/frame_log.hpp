#pragma once

#include "sketchplay/physics/world.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sketchplay::physics {

// Binary frame log, little-endian:
//   "SPF1", dt f64, body_count u32,
//   then per frame, per body: pos f64x3, quat f64x4 (w, x, y, z),
//   linvel f64x3, angvel f64x3.
// Body ids and contacts are not stored; frame count follows from file size.
inline constexpr char kFrameLogMagic[4] = {'S', 'P', 'F', '1'};
inline constexpr std::size_t kFrameLogHeaderBytes = 16;
inline constexpr std::size_t kFrameLogBodyBytes = 13 * 8;

struct FrameLog {
  double dt = kDefaultDt;
  std::uint32_t body_count = 0;
  std::vector<std::vector<BodySnapshot>> frames;  // snapshots carry no id
};

void write_frame_log(std::ostream& out, double dt, std::uint32_t body_count,
                     const std::vector<Frame>& frames);
std::string encode_frame_log(double dt, std::uint32_t body_count, const std::vector<Frame>& frames);

// Throws MalformedRecord on a bad header or truncated frame data.
FrameLog read_frame_log(std::istream& in);
FrameLog decode_frame_log(const std::string& bytes);

}  // namespace sketchplay::physics
