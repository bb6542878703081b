#include "sketchplay/recognition.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sketchplay::recognition {

namespace {

using nlohmann::json;

constexpr std::array<Material, 5> kTableMaterials = {Material::Metal, Material::Wood, Material::Rubber,
                                                     Material::Glass, Material::Cloth};

struct Keyword {
  const char* word;
  Material material;
};

// Matched against lower-cased alphabetic tokens of the prompt.
constexpr Keyword kKeywords[] = {
    {"metal", Material::Metal},    {"metallic", Material::Metal}, {"steel", Material::Metal},
    {"iron", Material::Metal},     {"aluminum", Material::Metal}, {"aluminium", Material::Metal},
    {"copper", Material::Metal},   {"wood", Material::Wood},      {"wooden", Material::Wood},
    {"timber", Material::Wood},    {"plank", Material::Wood},     {"domino", Material::Wood},
    {"dominoes", Material::Wood},  {"dominos", Material::Wood},   {"rubber", Material::Rubber},
    {"bouncy", Material::Rubber},  {"tennis", Material::Rubber},  {"glass", Material::Glass},
    {"crystal", Material::Glass},  {"cloth", Material::Cloth},    {"fabric", Material::Cloth},
    {"curtain", Material::Cloth},  {"flag", Material::Cloth},     {"towel", Material::Cloth},
    {"silk", Material::Cloth},     {"cotton", Material::Cloth},
};

std::optional<Material> keyword_material(const std::string& prompt) {
  std::string token;
  auto check = [&]() -> std::optional<Material> {
    for (const auto& k : kKeywords)
      if (token == k.word) return k.material;
    return std::nullopt;
  };
  for (char c : prompt + " ") {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!token.empty()) {
      if (auto m = check()) return m;
      token.clear();
    }
  }
  return std::nullopt;
}

json profile_to_json(const MaterialProfile& p) {
  return json{{"alpha_material", p.alpha_material}, {"density_rho", p.density_rho},
              {"friction_mu", p.friction_mu},       {"restitution_e", p.restitution_e},
              {"elastic_modulus_E", p.elastic_modulus_E}, {"poisson_nu", p.poisson_nu}};
}

double required_number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw Error(ErrorCode::InvalidConfig, std::string("missing numeric field \"") + key + "\"");
  }
  return it->get<double>();
}

void range_error(const char* field, double value) {
  throw Error(ErrorCode::ParameterOutOfRange,
              std::string(field) + " out of range: " + std::to_string(value));
}

json descriptors_to_json(const sketch::Descriptors& d) {
  return json{{"aspect_ratio", d.aspect_ratio}, {"compactness", d.compactness},
              {"stroke_count", d.stroke_count}, {"area", d.area},
              {"rectangularity", d.rectangularity}};
}

sketch::Descriptors descriptors_from_json(const json& j) {
  sketch::Descriptors d;
  d.aspect_ratio = required_number(j, "aspect_ratio");
  d.compactness = required_number(j, "compactness");
  d.stroke_count = static_cast<int>(required_number(j, "stroke_count"));
  d.area = required_number(j, "area");
  d.rectangularity = j.contains("rectangularity") ? required_number(j, "rectangularity") : 0.0;
  return d;
}

}  // namespace

std::string_view to_string(Material m) {
  switch (m) {
    case Material::Metal: return "metal";
    case Material::Wood: return "wood";
    case Material::Rubber: return "rubber";
    case Material::Glass: return "glass";
    case Material::Cloth: return "cloth";
    case Material::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Material> material_from_string(std::string_view name) {
  for (Material m : {Material::Metal, Material::Wood, Material::Rubber, Material::Glass,
                     Material::Cloth, Material::Unknown}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::RuleBased: return "rule_based";
    case Provenance::RemoteInference: return "remote_inference";
    case Provenance::UserOverride: return "user_override";
  }
  return "rule_based";
}

void validate_profile(const MaterialProfile& p) {
  auto finite = [](double x) { return std::isfinite(x); };
  if (!(finite(p.alpha_material) && p.alpha_material > 0.0 && p.alpha_material <= 1.0))
    range_error("alpha_material", p.alpha_material);
  if (!(finite(p.density_rho) && p.density_rho > 0.0)) range_error("density_rho", p.density_rho);
  if (!(finite(p.friction_mu) && p.friction_mu >= 0.0)) range_error("friction_mu", p.friction_mu);
  if (!(finite(p.restitution_e) && p.restitution_e >= 0.0 && p.restitution_e <= 1.0))
    range_error("restitution_e", p.restitution_e);
  if (!(finite(p.elastic_modulus_E) && p.elastic_modulus_E > 0.0))
    range_error("elastic_modulus_E", p.elastic_modulus_E);
  if (!(finite(p.poisson_nu) && p.poisson_nu >= 0.0 && p.poisson_nu < 0.5))
    range_error("poisson_nu", p.poisson_nu);
}

MaterialTable MaterialTable::builtin() {
  MaterialTable t;
  t.rows_[Material::Metal] = {Material::Metal, 0.1, 7800.0, 0.4, 0.3, 2e11, 0.30};
  t.rows_[Material::Wood] = {Material::Wood, 0.4, 700.0, 0.5, 0.4, 1e10, 0.35};
  t.rows_[Material::Rubber] = {Material::Rubber, 0.7, 1100.0, 0.9, 0.8, 1e7, 0.49};
  t.rows_[Material::Glass] = {Material::Glass, 0.15, 2500.0, 0.2, 0.2, 7e10, 0.22};
  t.rows_[Material::Cloth] = {Material::Cloth, 0.9, 300.0, 0.6, 0.05, 5e5, 0.30};
  return t;
}

MaterialTable MaterialTable::from_json_text(const std::string& text) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("materials") ||
      !doc["materials"].is_object()) {
    throw Error(ErrorCode::InvalidConfig, "material table must be {\"materials\": {...}}");
  }
  MaterialTable t = builtin();
  for (const auto& [name, row] : doc["materials"].items()) {
    const auto m = material_from_string(name);
    if (!m || *m == Material::Unknown) {
      throw Error(ErrorCode::InvalidConfig, "unknown material \"" + name + "\"");
    }
    MaterialProfile p = t.rows_[*m];
    p.alpha_material = required_number(row, "alpha_material");
    p.density_rho = required_number(row, "density_rho");
    p.friction_mu = required_number(row, "friction_mu");
    p.restitution_e = required_number(row, "restitution_e");
    p.elastic_modulus_E = required_number(row, "elastic_modulus_E");
    p.poisson_nu = required_number(row, "poisson_nu");
    t.rows_[*m] = p;
  }
  t.validate();
  return t;
}

MaterialTable MaterialTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open material table " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

void MaterialTable::validate() const {
  for (const auto& [m, p] : rows_) {
    try {
      validate_profile(p);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, std::string(to_string(m)) + ": " + e.detail());
    }
  }
  if (!(at(Material::Metal).alpha_material < at(Material::Cloth).alpha_material)) {
    throw Error(ErrorCode::InvalidConfig, "alpha(metal) must be below alpha(cloth)");
  }
}

const MaterialProfile& MaterialTable::at(Material m) const {
  const auto it = rows_.find(m);
  if (it == rows_.end()) {
    throw Error(ErrorCode::InvalidConfig, "no table row for " + std::string(to_string(m)));
  }
  return it->second;
}

std::string MaterialTable::to_json_text() const {
  json rows = json::object();
  for (Material m : kTableMaterials) rows[std::string(to_string(m))] = profile_to_json(at(m));
  return json{{"materials", rows}}.dump(2) + "\n";
}

MaterialProfile infer_material_rule_based(const sketch::SketchObject& object,
                                          const std::optional<std::string>& prompt,
                                          const MaterialTable& table) {
  if (prompt) {
    if (auto m = keyword_material(*prompt)) return table.at(*m);
  }
  const auto& d = object.descriptors;
  if (d.compactness > 0.9) return table.at(Material::Rubber);
  if (d.rectangularity > 0.9 && d.aspect_ratio > 3.0) return table.at(Material::Wood);
  if (d.stroke_count >= 6 && d.compactness < 0.5) return table.at(Material::Cloth);
  return table.at(Material::Wood);
}

MassEstimate estimate_mass(const sketch::SketchObject& object,
                           const sketch::MeshPrimitive& primitive,
                           const MaterialProfile& profile) {
  if (!(primitive.volume >= kMinVolume)) {
    throw Error(ErrorCode::NonPositiveVolume,
                object.id + ": volume " + std::to_string(primitive.volume) + " m^3");
  }
  validate_profile(profile);
  return {profile.density_rho * primitive.volume, primitive.volume, Provenance::RuleBased};
}

std::vector<Exemplar> builtin_exemplars() {
  // Descriptor -> property pairs spanning the built-in materials.
  return {
      {{1.0, 0.98, 1, 0.0034, 0.79}, Material::Rubber, 0.7, 1100.0, 0.057},
      {{1.0, 0.97, 1, 0.0064, 0.78}, Material::Metal, 0.1, 7800.0, 4.0},
      {{8.0, 0.31, 1, 0.0008, 1.0}, Material::Wood, 0.4, 700.0, 0.022},
      {{1.5, 0.75, 4, 0.06, 0.97}, Material::Wood, 0.4, 700.0, 2.5},
      {{1.2, 0.42, 9, 0.5, 0.82}, Material::Cloth, 0.9, 300.0, 0.15},
      {{2.0, 0.70, 2, 0.02, 0.95}, Material::Glass, 0.15, 2500.0, 0.4},
  };
}

std::vector<Exemplar> load_exemplars(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open exemplar file " + path);
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains("exemplars") || !doc["exemplars"].is_array()) {
    throw Error(ErrorCode::InvalidConfig, path + ": expected {\"exemplars\": [...]}");
  }
  std::vector<Exemplar> out;
  for (const auto& e : doc["exemplars"]) {
    Exemplar x;
    x.descriptors = descriptors_from_json(e.at("descriptors"));
    const json& p = e.at("profile");
    const auto label = material_from_string(p.at("label").get<std::string>());
    if (!label) throw Error(ErrorCode::InvalidConfig, path + ": bad exemplar label");
    x.label = *label;
    x.alpha_material = required_number(p, "alpha_material");
    x.density_rho = required_number(p, "density_rho");
    x.mass_kg = required_number(p, "mass_kg");
    out.push_back(x);
  }
  return out;
}

std::string build_request_payload(const InferenceRequest& request) {
  json exemplars = json::array();
  for (const auto& e : request.exemplars) {
    exemplars.push_back({{"descriptors", descriptors_to_json(e.descriptors)},
                         {"profile",
                          {{"label", std::string(to_string(e.label))},
                           {"alpha_material", e.alpha_material},
                           {"density_rho", e.density_rho},
                           {"mass_kg", e.mass_kg}}}});
  }
  json query = {{"descriptors", descriptors_to_json(request.descriptors)},
                {"prompt", request.prompt.value_or("")}};
  if (request.thumbnail_pgm_base64) query["thumbnail"] = *request.thumbnail_pgm_base64;
  return json{{"exemplars", exemplars}, {"query", query}}.dump();
}

InferenceResponse parse_response(const std::string& body) {
  const json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::InvalidResponse, "response is not a JSON object");
  }
  auto number = [&](const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end() || !it->is_number()) {
      throw Error(ErrorCode::InvalidResponse, std::string("missing numeric \"") + key + "\"");
    }
    const double x = it->get<double>();
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidResponse, std::string(key) + " not finite");
    return x;
  };
  InferenceResponse r;
  const auto label_it = doc.find("label");
  if (label_it == doc.end() || !label_it->is_string()) {
    throw Error(ErrorCode::InvalidResponse, "missing \"label\"");
  }
  const auto label = material_from_string(label_it->get<std::string>());
  if (!label || *label == Material::Unknown) {
    throw Error(ErrorCode::InvalidResponse, "unsupported label \"" + label_it->get<std::string>() + "\"");
  }
  r.label = *label;
  r.alpha_material = number("alpha_material");
  r.density_rho = number("density_rho");
  r.mass_kg = number("mass_kg");
  r.confidence = number("confidence");
  if (!(r.alpha_material > 0.0 && r.alpha_material <= 1.0))
    throw Error(ErrorCode::InvalidResponse, "alpha_material outside (0, 1]");
  if (!(r.density_rho > 0.0)) throw Error(ErrorCode::InvalidResponse, "density_rho must be positive");
  if (!(r.mass_kg > 0.0)) throw Error(ErrorCode::InvalidResponse, "mass_kg must be positive");
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
    throw Error(ErrorCode::InvalidResponse, "confidence outside [0, 1]");
  return r;
}

MaterialInference infer_material_remote(InferenceExchange& exchange, const EndpointConfig& endpoint,
                                        const sketch::SketchObject& object,
                                        const MaterialTable& table) {
  MaterialInference out;
  try {
    if (endpoint.url.empty()) throw Error(ErrorCode::RemoteUnavailable, "no endpoint configured");
    if (exchange.request.exemplars.empty()) {
      throw Error(ErrorCode::InvalidConfig, "few-shot exemplar list is empty");
    }
    const InferenceResponse r = RemoteClient(endpoint).send(exchange.request);
    exchange.response = r;
    MaterialProfile p = table.at(r.label);
    p.alpha_material = r.alpha_material;
    p.density_rho = r.density_rho;
    validate_profile(p);
    out.profile = p;
    out.provenance = Provenance::RemoteInference;
    out.remote_mass_kg = r.mass_kg;
    out.confidence = r.confidence;
    return out;
  } catch (const Error& e) {
    out.diagnostic = e.what();
  }
  out.profile = infer_material_rule_based(object, exchange.request.prompt, table);
  out.provenance = Provenance::RuleBased;
  out.confidence = 1.0;
  return out;
}

double transfer_factor(double m_hand, double m_obj, double alpha_material) {
  if (!(m_hand > 0.0) || !(m_obj > 0.0) || !std::isfinite(m_hand) || !std::isfinite(m_obj)) {
    throw Error(ErrorCode::NonPositiveMass, "m_hand and m_obj must be positive");
  }
  if (!(alpha_material > 0.0 && alpha_material <= 1.0)) {
    throw Error(ErrorCode::AlphaOutOfRange, "alpha_material must be in (0, 1]");
  }
  return (m_hand + alpha_material * m_obj) / (m_hand + m_obj);
}

Vec3 transfer_velocity(const VelocityTransfer& input) {
  return input.v_hand * transfer_factor(input.m_hand, input.m_obj, input.alpha_material);
}

}  // namespace sketchplay::recognition
