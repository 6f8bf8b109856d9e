#include "photocool/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "photocool/rng.hpp"

namespace photocool {

using nlohmann::json;

json quantity(double value, std::string_view unit) {
  return {{"value", value}, {"unit", std::string(unit)}};
}

json to_json(const DerivedQuantities& d) {
  return {
      {"pump_amplitude", quantity(d.pump_amplitude, "rad/s")},
      {"photon_number", quantity(d.photon_number, "1")},
      {"force_gradient", quantity(d.force_gradient, "N/m")},
      {"shot_noise_strength", quantity(d.shot_noise_strength, "N s^0.5")},
      {"rp_damping", quantity(d.rp_damping, "rad/s")},
      {"rp_occupation", quantity(d.rp_occupation, "1")},
      {"ph_damping", quantity(d.ph_damping, "rad/s")},
      {"renormalized_frequency", quantity(d.renormalized_frequency, "rad/s")},
      {"ph_occupation", quantity(d.ph_occupation, "1")},
      {"thermal_occupation", quantity(d.thermal_occupation, "1")},
      {"classical_population", quantity(d.classical_population, "1")},
      {"noise_population", quantity(d.noise_population, "1")},
      {"total_population", quantity(d.total_population, "1")},
      {"effective_temperature", quantity(d.effective_temperature, "K")},
      {"stability_margin", quantity(d.stability_margin, "1")},
  };
}

json provenance(const DeviceConfig& cfg, std::optional<std::uint64_t> seed) {
  json out = {
      {"tool", "photocool"},
      {"version", std::string(tool_version)},
      {"config_name", cfg.name},
      {"config_digest", cfg.digest},
      {"params_hash", params_hash(cfg.params)},
      {"psd_convention",
       "one-sided, <x^2> = (1/2pi) int_0^inf S(omega) d omega, n = m omega_tilde <x^2>/hbar - 1/2"},
  };
  if (seed) {
    out["seed"] = *seed;
    out["rng"] = std::string(rng_algorithm);
  } else {
    out["seed"] = nullptr;
  }
  return out;
}

void TextTable::print(std::ostream& out) const {
  std::vector<std::size_t> width(header_.size(), 0);
  auto widen = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], row[i].size());
    }
  };
  widen(header_);
  for (const auto& r : rows_) widen(r);
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < row.size() ? row[i] : "";
      out << cell << std::string(width[i] - cell.size() + (i + 1 < width.size() ? 2 : 0), ' ');
    }
    out << '\n';
  };
  line(header_);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out << std::string(total > 2 ? total - 2 : total, '-') << '\n';
  for (const auto& r : rows_) line(r);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace photocool
