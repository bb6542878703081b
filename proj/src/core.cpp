#include "sketchplay/core.hpp"

namespace sketchplay {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateTimestep: return "DegenerateTimestep";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyCanvas: return "EmptyCanvas";
    case ErrorCode::DegenerateOutline: return "DegenerateOutline";
    case ErrorCode::NonPositiveVolume: return "NonPositiveVolume";
    case ErrorCode::NonPositiveMass: return "NonPositiveMass";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
    case ErrorCode::InvalidResponse: return "InvalidResponse";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::UnknownBody: return "UnknownBody";
    case ErrorCode::UnsupportedShape: return "UnsupportedShape";
    case ErrorCode::EmptySpec: return "EmptySpec";
    case ErrorCode::DegenerateCamera: return "DegenerateCamera";
    case ErrorCode::BadStatus: return "BadStatus";
    case ErrorCode::MalformedStroke: return "MalformedStroke";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace sketchplay
