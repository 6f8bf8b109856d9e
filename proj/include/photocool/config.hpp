#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "photocool/params.hpp"

namespace photocool {

/// A device description loaded from JSON. Keys carry their unit; for
/// frequency-like quantities exactly one of the `_hz` / `_rad_s` forms is
/// allowed. The pump is given either as a frequency or as a detuning.
///
///   {
///     "name": "...",
///     "cavity": {"omega_c_rad_s", "L_c_m", "Gamma_c_rad_s", "alpha_rad_s",
///                "omega_p_rad_s" | "detuning_rad_s" | "detuning_gamma_c",
///                "power_w"},
///     "cantilever": {"omega_m_hz", "mass_kg", "Q_m", "tau_s", "chi_s_per_m",
///                    "L_m_m", "cross_section_m2", "kappa_w_per_m_k",
///                    "epsilon"},
///     "environment": {"temperature_k"},
///     "assumed": ["cavity.L_c_m", ...],
///     "notes": "...",
///     "reference": {...}
///   }
struct DeviceConfig {
  std::string name;
  SystemParams params;
  std::vector<std::string> assumed;
  std::string notes;
  nlohmann::json reference;  // free-form published values, echoed in reports
  nlohmann::json source;     // the parsed document
  std::string digest;        // FNV-1a of the canonical dump of `source`
};

/// Throws parse_error for malformed JSON and validation_error for schema or
/// physical-invariant violations.
DeviceConfig parse_config(const nlohmann::json& doc, const std::string& origin = "config");
DeviceConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form of params (rad/s keys only); parse_config round-trips it.
nlohmann::json to_json(const SystemParams& p);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace photocool
