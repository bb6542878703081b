#include "sketchplay/physics/frame_log.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace sketchplay::physics {

namespace {

static_assert(std::endian::native == std::endian::little, "frame log assumes a little-endian host");

void put_f64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

double get_f64(const char* p) {
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

void put_vec(std::string& out, const Vec3& v) {
  for (int i = 0; i < 3; ++i) put_f64(out, v[i]);
}

Vec3 get_vec(const char* p) { return Vec3(get_f64(p), get_f64(p + 8), get_f64(p + 16)); }

}  // namespace

std::string encode_frame_log(double dt, std::uint32_t body_count, const std::vector<Frame>& frames) {
  std::string out(kFrameLogMagic, 4);
  out.reserve(kFrameLogHeaderBytes + frames.size() * body_count * kFrameLogBodyBytes);
  put_f64(out, dt);
  char count[4];
  std::memcpy(count, &body_count, 4);
  out.append(count, 4);
  for (const auto& f : frames) {
    if (f.bodies.size() != body_count) {
      throw Error(ErrorCode::MalformedRecord, "frame " + std::to_string(f.index) +
                                                  " has a different body count than the log");
    }
    for (const auto& b : f.bodies) {
      put_vec(out, b.position);
      put_f64(out, b.orientation.w());
      put_f64(out, b.orientation.x());
      put_f64(out, b.orientation.y());
      put_f64(out, b.orientation.z());
      put_vec(out, b.linear_velocity);
      put_vec(out, b.angular_velocity);
    }
  }
  return out;
}

void write_frame_log(std::ostream& out, double dt, std::uint32_t body_count,
                     const std::vector<Frame>& frames) {
  const std::string bytes = encode_frame_log(dt, body_count, frames);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FrameLog decode_frame_log(const std::string& bytes) {
  if (bytes.size() < kFrameLogHeaderBytes || std::memcmp(bytes.data(), kFrameLogMagic, 4) != 0) {
    throw Error(ErrorCode::MalformedRecord, "not an SPF1 frame log");
  }
  FrameLog log;
  log.dt = get_f64(bytes.data() + 4);
  std::memcpy(&log.body_count, bytes.data() + 12, 4);
  const std::size_t frame_bytes = log.body_count * kFrameLogBodyBytes;
  const std::size_t payload = bytes.size() - kFrameLogHeaderBytes;
  if (frame_bytes == 0 ? payload != 0 : payload % frame_bytes != 0) {
    throw Error(ErrorCode::MalformedRecord, "frame log is truncated");
  }
  const std::size_t n = frame_bytes == 0 ? 0 : payload / frame_bytes;
  const char* p = bytes.data() + kFrameLogHeaderBytes;
  log.frames.resize(n);
  for (auto& frame : log.frames) {
    frame.resize(log.body_count);
    for (auto& b : frame) {
      b.position = get_vec(p);
      b.orientation = Quat(get_f64(p + 24), get_f64(p + 32), get_f64(p + 40), get_f64(p + 48));
      b.linear_velocity = get_vec(p + 56);
      b.angular_velocity = get_vec(p + 80);
      p += kFrameLogBodyBytes;
    }
  }
  return log;
}

FrameLog read_frame_log(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_frame_log(bytes);
}

}  // namespace sketchplay::physics
