#pragma once

#include <string_view>

// Every Blender-facing literal the emitter depends on. Targets the 4.x
// Python API; retargeting another release should only touch this file.
namespace sketchplay::emitter::blender {

inline constexpr std::string_view kApiLevel = "4.x";
inline constexpr std::string_view kGenerator = "sketchplay-emitter 0.1.0";

inline constexpr std::string_view kSectionHeaders[3] = {
    "# --- SECTION 1: MATERIAL ASSIGNMENT ---",
    "# --- SECTION 2: PHYSICAL PROPERTY SETUP ---",
    "# --- SECTION 3: MOTION SIMULATION ---",
};
inline constexpr std::string_view kObjectMarker = "# object: ";
inline constexpr std::string_view kPropsPrefix = "props = ";
inline constexpr std::string_view kProvenanceHeader = "# --- PROVENANCE ---";

inline constexpr std::string_view kRigidActive = "ACTIVE";
inline constexpr std::string_view kRigidPassive = "PASSIVE";
inline constexpr std::string_view kShapeSphere = "SPHERE";
inline constexpr std::string_view kShapeBox = "BOX";
inline constexpr std::string_view kShapeConvexHull = "CONVEX_HULL";
inline constexpr std::string_view kSoftBodyModifier = "SOFT_BODY";
inline constexpr std::string_view kClothModifier = "CLOTH";
inline constexpr std::string_view kCollisionModifier = "COLLISION";
inline constexpr std::string_view kPinGroup = "pin";

inline constexpr int kSphereSegments = 32;
inline constexpr int kSphereRings = 16;
inline constexpr double kGroundSize = 100.0;  // m
inline constexpr double kMaxCollisionMargin = 0.04;  // Blender's default, m

}  // namespace sketchplay::emitter::blender
