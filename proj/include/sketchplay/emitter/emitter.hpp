#pragma once

#include "sketchplay/scene.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace sketchplay::emitter {

using SceneSpec = scene::Scene;

struct SceneScript {
  std::string text;
  std::array<std::size_t, 3> sections{};  // byte offsets of the section headers
};

// Deterministic Blender script. Objects are emitted in id order, so the
// input order never affects the bytes. Throws UnsupportedShape for soft
// spheres and EmptySpec when the environment yields no frames.
SceneScript emit_script(const SceneSpec& spec);

// 9 significant digits; exact round trip for values passed through
// scene::quantize9.
std::string format_number(double value);

enum class ViolationKind { Syntax, Ordering, Coverage };

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Static checks only; the script is never executed. When `expected_ids` is
// given, each of them must be covered too.
ValidationReport validate_script(const std::string& text,
                                 const std::vector<std::string>* expected_ids = nullptr);

struct ExtractedProperties {
  double mass = 0.0;
  double friction = 0.0;
  double restitution = 0.0;
};

// Reads the `props = {...}` line following each object marker in section 2.
// Throws MalformedRecord if a property line cannot be parsed.
std::map<std::string, ExtractedProperties> extract_properties(const std::string& text);

}  // namespace sketchplay::emitter
