#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sketchplay {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Every failure the library reports carries one of these codes. The service
// layer serializes the code name into its error payloads.
enum class ErrorCode {
  MalformedRecord,
  NonMonotonicTime,
  IndexOutOfRange,
  TooFewFrames,
  TooFewPoints,
  DegenerateTimestep,
  EmptyInput,
  EmptyCanvas,
  DegenerateOutline,
  NonPositiveVolume,
  NonPositiveMass,
  AlphaOutOfRange,
  RemoteUnavailable,
  InvalidResponse,
  ParameterOutOfRange,
  NumericalBlowup,
  UnknownBody,
  UnsupportedShape,
  EmptySpec,
  DegenerateCamera,
  BadStatus,
  MalformedStroke,
  UnknownObject,
  UnknownSession,
  RangeOutOfBounds,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Thrown by the simulator; remembers the frame that went bad.
class NumericalBlowup : public Error {
 public:
  NumericalBlowup(std::int64_t frame_index, const std::string& detail)
      : Error(ErrorCode::NumericalBlowup,
              "frame " + std::to_string(frame_index) + ": " + detail),
        frame_index_(frame_index) {}

  std::int64_t frame_index() const noexcept { return frame_index_; }

 private:
  std::int64_t frame_index_;
};

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace sketchplay
