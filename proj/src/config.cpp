#include "photocool/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "photocool/constants.hpp"
#include "photocool/error.hpp"

namespace photocool {

using nlohmann::json;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

class Section {
 public:
  Section(const json& doc, std::string name, std::string origin)
      : name_(std::move(name)), origin_(std::move(origin)) {
    if (!doc.contains(name_)) fail("missing section '" + name_ + "'");
    obj_ = &doc.at(name_);
    if (!obj_->is_object()) fail("section '" + name_ + "' must be an object");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::validation_error, origin_ + ": " + what);
  }

  std::optional<double> optional(const std::string& key) {
    seen_.insert(key);
    if (!obj_->contains(key)) return std::nullopt;
    const auto& v = obj_->at(key);
    if (!v.is_number()) fail(name_ + "." + key + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(name_ + "." + key + " must be finite");
    return d;
  }

  double required(const std::string& key) {
    auto v = optional(key);
    if (!v) fail("missing " + name_ + "." + key);
    return *v;
  }

  // Exactly one of the keys; each paired with its factor to SI angular units.
  double one_of(const std::vector<std::pair<std::string, double>>& keys, double scale_ref = 1.0) {
    std::optional<double> value;
    std::string chosen;
    for (const auto& [key, factor] : keys) {
      if (auto v = optional(key)) {
        if (value) fail(name_ + ": both '" + chosen + "' and '" + key + "' given; use exactly one");
        value = *v * (factor > 0.0 ? factor : scale_ref);
        chosen = key;
      }
    }
    if (!value) {
      std::string names;
      for (const auto& k : keys) names += (names.empty() ? "" : " | ") + k.first;
      fail("missing " + name_ + ".(" + names + ")");
    }
    return *value;
  }

  bool has(const std::string& key) const { return obj_->contains(key); }

  void reject_unknown() const {
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.count(key)) fail("unknown key " + name_ + "." + key);
    }
  }

 private:
  std::string name_;
  std::string origin_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace

DeviceConfig parse_config(const json& doc, const std::string& origin) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::validation_error, origin + ": " + what);
  };
  if (!doc.is_object()) fail("top level must be an object");
  static const std::set<std::string> top_keys = {"name",  "cavity", "cantilever", "environment",
                                                 "assumed", "notes", "reference"};
  for (const auto& [key, value] : doc.items()) {
    if (!top_keys.count(key)) fail("unknown key '" + key + "'");
  }

  DeviceConfig cfg;
  cfg.source = doc;
  cfg.digest = fnv1a_hex(doc.dump());
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) fail("name must be a string");
    cfg.name = doc["name"].get<std::string>();
  }
  if (doc.contains("notes")) {
    if (!doc["notes"].is_string()) fail("notes must be a string");
    cfg.notes = doc["notes"].get<std::string>();
  }
  if (doc.contains("assumed")) {
    if (!doc["assumed"].is_array()) fail("assumed must be an array of key names");
    for (const auto& a : doc["assumed"]) {
      if (!a.is_string()) fail("assumed must be an array of key names");
      cfg.assumed.push_back(a.get<std::string>());
    }
  }
  if (doc.contains("reference")) {
    if (!doc["reference"].is_object()) fail("reference must be an object");
    cfg.reference = doc["reference"];
  }

  const double two_pi = constants::two_pi;
  auto& p = cfg.params;

  Section cav(doc, "cavity", origin);
  p.cavity.frequency = cav.one_of({{"omega_c_rad_s", 1.0}, {"omega_c_hz", two_pi}});
  p.cavity.length = cav.required("L_c_m");
  p.cavity.linewidth = cav.one_of({{"Gamma_c_rad_s", 1.0}, {"Gamma_c_hz", two_pi}});
  p.cavity.absorption_rate = cav.one_of({{"alpha_rad_s", 1.0}, {"alpha_hz", two_pi}});
  // 0 as factor: scale by the linewidth.
  const double pump = cav.one_of({{"omega_p_rad_s", 1.0},
                                  {"omega_p_hz", two_pi},
                                  {"detuning_rad_s", 1.0},
                                  {"detuning_hz", two_pi},
                                  {"detuning_gamma_c", 0.0}},
                                 p.cavity.linewidth);
  const bool given_as_pump = cav.has("omega_p_rad_s") || cav.has("omega_p_hz");
  p.cavity.pump_frequency = given_as_pump ? pump : p.cavity.frequency - pump;
  p.cavity.power = cav.required("power_w");
  cav.reject_unknown();

  Section cant(doc, "cantilever", origin);
  p.cantilever.frequency = cant.one_of({{"omega_m_rad_s", 1.0}, {"omega_m_hz", two_pi}});
  p.cantilever.mass = cant.required("mass_kg");
  p.cantilever.quality_factor = cant.required("Q_m");
  p.cantilever.thermal_delay = cant.required("tau_s");
  p.cantilever.deformation_coefficient = cant.required("chi_s_per_m");
  p.cantilever.length = cant.required("L_m_m");
  p.cantilever.cross_section = cant.required("cross_section_m2");
  p.cantilever.thermal_conductivity = cant.required("kappa_w_per_m_k");
  if (auto eps = cant.optional("epsilon")) p.cantilever.averaging_factor = *eps;
  cant.reject_unknown();

  Section env(doc, "environment", origin);
  p.environment.temperature = env.required("temperature_k");
  env.reject_unknown();

  try {
    validate(p);
  } catch (const Error& e) {
    fail(e.what());
  }
  return cfg;
}

DeviceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse_error, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.string());
}

json to_json(const SystemParams& p) {
  return {
      {"cavity",
       {{"omega_c_rad_s", p.cavity.frequency},
        {"L_c_m", p.cavity.length},
        {"Gamma_c_rad_s", p.cavity.linewidth},
        {"alpha_rad_s", p.cavity.absorption_rate},
        {"omega_p_rad_s", p.cavity.pump_frequency},
        {"power_w", p.cavity.power}}},
      {"cantilever",
       {{"omega_m_rad_s", p.cantilever.frequency},
        {"mass_kg", p.cantilever.mass},
        {"Q_m", p.cantilever.quality_factor},
        {"tau_s", p.cantilever.thermal_delay},
        {"chi_s_per_m", p.cantilever.deformation_coefficient},
        {"L_m_m", p.cantilever.length},
        {"cross_section_m2", p.cantilever.cross_section},
        {"kappa_w_per_m_k", p.cantilever.thermal_conductivity},
        {"epsilon", p.cantilever.averaging_factor}}},
      {"environment", {{"temperature_k", p.environment.temperature}}},
  };
}

}  // namespace photocool
