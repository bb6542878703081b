#pragma once

#include "sketchplay/core.hpp"
#include "sketchplay/sketch.hpp"

#include <array>
#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sketchplay::recognition {

enum class Material { Metal, Wood, Rubber, Glass, Cloth, Unknown };

std::string_view to_string(Material m);
std::optional<Material> material_from_string(std::string_view name);

struct MaterialProfile {
  Material label = Material::Unknown;
  double alpha_material = 1.0;     // (0, 1]
  double density_rho = 1000.0;     // kg/m^3
  double friction_mu = 0.5;
  double restitution_e = 0.5;      // [0, 1]
  double elastic_modulus_E = 1e9;  // Pa
  double poisson_nu = 0.3;         // [0, 0.5)

  bool operator==(const MaterialProfile&) const = default;
};

// Throws ParameterOutOfRange naming the first field outside its range.
void validate_profile(const MaterialProfile& profile);

// Editable material defaults. Only the alpha ordering metal < cloth is a hard
// requirement; everything else is an engineering default.
class MaterialTable {
 public:
  static MaterialTable builtin();
  static MaterialTable from_json_text(const std::string& text);
  static MaterialTable load(const std::string& path);

  const MaterialProfile& at(Material m) const;
  std::string to_json_text() const;

 private:
  void validate() const;
  std::map<Material, MaterialProfile> rows_;
};

enum class Provenance { RuleBased, RemoteInference, UserOverride };
std::string_view to_string(Provenance p);

struct MassEstimate {
  double mass_kg = 0.0;
  double volume_m3 = 0.0;
  Provenance provenance = Provenance::RuleBased;
};

inline constexpr double kMinVolume = 1e-12;  // m^3

MaterialProfile infer_material_rule_based(const sketch::SketchObject& object,
                                          const std::optional<std::string>& prompt,
                                          const MaterialTable& table = MaterialTable::builtin());

MassEstimate estimate_mass(const sketch::SketchObject& object,
                           const sketch::MeshPrimitive& primitive,
                           const MaterialProfile& profile);

// ---- Remote few-shot inference -------------------------------------------

struct Exemplar {
  sketch::Descriptors descriptors;
  Material label = Material::Wood;
  double alpha_material = 0.4;
  double density_rho = 700.0;
  double mass_kg = 1.0;
};

// The six bundled descriptor -> property pairs.
std::vector<Exemplar> builtin_exemplars();
std::vector<Exemplar> load_exemplars(const std::string& path);

struct InferenceRequest {
  sketch::Descriptors descriptors;
  std::optional<std::string> thumbnail_pgm_base64;
  std::optional<std::string> prompt;
  std::vector<Exemplar> exemplars;
};

struct InferenceResponse {
  Material label = Material::Unknown;
  double alpha_material = 0.0;
  double density_rho = 0.0;
  double mass_kg = 0.0;
  double confidence = 0.0;
};

struct InferenceExchange {
  InferenceRequest request;
  std::optional<InferenceResponse> response;
};

std::string build_request_payload(const InferenceRequest& request);

// Parses and range-checks a response body. Throws InvalidResponse.
InferenceResponse parse_response(const std::string& body);

struct EndpointConfig {
  std::string url;  // http://host:port/path
  std::string token;
  std::chrono::milliseconds connect_timeout{1000};
  std::chrono::milliseconds read_timeout{10000};

  // Reads SKETCHPLAY_INFER_URL / SKETCHPLAY_INFER_TOKEN; empty url if unset.
  static EndpointConfig from_environment();
};

// Stateless apart from its configuration; every call opens its own
// connection, so one instance can serve many sessions concurrently.
class RemoteClient {
 public:
  explicit RemoteClient(EndpointConfig config) : config_(std::move(config)) {}

  // Sends one request. Throws RemoteUnavailable or InvalidResponse.
  InferenceResponse send(const InferenceRequest& request) const;

  const EndpointConfig& config() const { return config_; }

 private:
  EndpointConfig config_;
};

struct MaterialInference {
  MaterialProfile profile;
  Provenance provenance = Provenance::RuleBased;
  std::optional<double> remote_mass_kg;
  double confidence = 1.0;
  std::string diagnostic;  // why the remote path was abandoned, if it was
};

// Few-shot remote inference with rule-based fallback. Never throws for
// transport or validation failures; the result records which path won.
MaterialInference infer_material_remote(InferenceExchange& exchange,
                                        const EndpointConfig& endpoint,
                                        const sketch::SketchObject& object,
                                        const MaterialTable& table = MaterialTable::builtin());

// ---- Velocity transfer ----------------------------------------------------

inline constexpr double kDefaultHandMass = 0.4;  // kg

struct VelocityTransfer {
  Vec3 v_hand = Vec3::Zero();
  double m_hand = kDefaultHandMass;
  double m_obj = 1.0;
  double alpha_material = 1.0;
};

// (m_hand + alpha * m_obj) / (m_hand + m_obj)
double transfer_factor(double m_hand, double m_obj, double alpha_material);

Vec3 transfer_velocity(const VelocityTransfer& input);

}  // namespace sketchplay::recognition
