#include "photocool/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <string>

#include "photocool/constants.hpp"
#include "photocool/error.hpp"

namespace photocool {

using constants::hbar;
using constants::k_boltzmann;

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::degenerate_detuning: return "degenerate-detuning";
    case ErrorKind::instability: return "instability";
    case ErrorKind::heating_regime: return "heating-regime";
    case ErrorKind::grid_too_coarse: return "grid-too-coarse";
    case ErrorKind::negative_occupancy: return "negative-occupancy";
    case ErrorKind::nonstationary_trajectory: return "nonstationary-trajectory";
    case ErrorKind::too_few_segments: return "too-few-segments";
    case ErrorKind::instability_detected: return "instability-detected";
    case ErrorKind::nan_detected: return "nan-detected";
    case ErrorKind::heating_detuning: return "heating-detuning";
    case ErrorKind::no_feasible_point: return "no-feasible-point";
    case ErrorKind::fit_diverged: return "fit-diverged";
    case ErrorKind::underdetermined: return "underdetermined";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::validation_error: return "validation-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::instability:
    case ErrorKind::heating_regime:
    case ErrorKind::heating_detuning:
      return 3;
    case ErrorKind::instability_detected:
    case ErrorKind::nan_detected:
    case ErrorKind::nonstationary_trajectory:
      return 4;
    case ErrorKind::no_feasible_point:
    case ErrorKind::fit_diverged:
      return 5;
    default:
      return 2;
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::invalid_parameter, std::string("invalid parameter: ") + what);
}

double lorentzian_width_sq(const SystemParams& p) {
  return 0.25 * p.cavity.linewidth * p.cavity.linewidth;
}

}  // namespace

void validate(const SystemParams& p) {
  const auto& c = p.cavity;
  const auto& m = p.cantilever;
  require(std::isfinite(c.frequency) && c.frequency > 0, "omega_c > 0");
  require(std::isfinite(c.length) && c.length > 0, "L_c > 0");
  require(std::isfinite(c.linewidth) && c.linewidth > 0, "Gamma_c > 0");
  require(std::isfinite(c.absorption_rate) && c.absorption_rate > 0, "alpha > 0");
  require(c.absorption_rate <= c.linewidth, "alpha <= Gamma_c (absorption is part of the total loss)");
  require(std::isfinite(c.pump_frequency) && c.pump_frequency > 0, "omega_p > 0");
  require(std::isfinite(c.power) && c.power >= 0, "P >= 0");
  require(std::isfinite(p.detuning()), "finite detuning");
  for (auto [v, name] : std::initializer_list<std::pair<double, const char*>>{
           {m.frequency, "omega_m > 0"},
           {m.mass, "m > 0"},
           {m.quality_factor, "Q_m > 0"},
           {m.thermal_delay, "tau > 0"},
           {m.deformation_coefficient, "chi > 0"},
           {m.length, "L_m > 0"},
           {m.cross_section, "s > 0"},
           {m.thermal_conductivity, "kappa > 0"},
           {m.averaging_factor, "epsilon > 0"},
           {p.environment.temperature, "T > 0"}}) {
    require(std::isfinite(v) && v > 0, name);
  }
}

std::string params_hash(const SystemParams& p) {
  // FNV-1a over the IEEE-754 bit patterns, in declaration order.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  const auto& c = p.cavity;
  const auto& m = p.cantilever;
  for (double v : {c.frequency, c.length, c.linewidth, c.absorption_rate, c.pump_frequency,
                   c.power, m.frequency, m.mass, m.quality_factor, m.thermal_delay,
                   m.deformation_coefficient, m.length, m.cross_section,
                   m.thermal_conductivity, m.averaging_factor, p.environment.temperature}) {
    mix(v);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double pump_amplitude(const SystemParams& p) {
  require(p.cavity.power >= 0, "P >= 0");
  require(p.cavity.pump_frequency > 0, "omega_p > 0");
  require(p.cavity.linewidth > 0, "Gamma_c > 0");
  return std::sqrt(p.cavity.linewidth * p.cavity.power / (4.0 * hbar * p.cavity.pump_frequency));
}

double cavity_photon_number(const SystemParams& p, double x) {
  if (!(std::abs(x) < p.cavity.length)) {
    throw Error(ErrorKind::invalid_parameter, "invalid parameter: |x| < L_c");
  }
  const double e = pump_amplitude(p);
  const double shift = p.cavity.frequency * (1.0 - x / p.cavity.length) - p.cavity.pump_frequency;
  return e * e / (shift * shift + lorentzian_width_sq(p));
}

ForceCoefficients force_gradient_and_noise(const SystemParams& p) {
  const double nc = cavity_photon_number(p, 0.0);
  const double delta = p.detuning();
  const double wc = p.cavity.frequency;
  const double alpha = p.cavity.absorption_rate;
  const double chi = p.cantilever.deformation_coefficient;
  const double lorentz = delta * delta + lorentzian_width_sq(p);
  ForceCoefficients out;
  out.gradient = nc * alpha * chi * hbar * wc / p.cavity.length *
                 (2.0 * wc * delta - lorentz) / lorentz;
  out.noise = chi * hbar * wc * std::sqrt(alpha * nc);
  return out;
}

RadiationPressure radiation_pressure_terms(const SystemParams& p) {
  const double delta = p.detuning();
  if (delta == 0.0) {
    throw Error(ErrorKind::degenerate_detuning,
                "radiation-pressure occupation diverges at zero detuning");
  }
  const double nc = cavity_photon_number(p, 0.0);
  const double wc = p.cavity.frequency;
  const double gc = p.cavity.linewidth;
  const double lc = p.cavity.length;
  const double lorentz = delta * delta + lorentzian_width_sq(p);
  RadiationPressure out;
  out.damping = 4.0 * nc * hbar * gc * wc * wc / (p.cantilever.mass * lc * lc) * delta /
                (lorentz * lorentz);
  out.occupation = lorentz / (4.0 * p.cantilever.frequency * delta);
  return out;
}

double photothermal_damping(const SystemParams& p, double gradient) {
  const double tau = p.cantilever.thermal_delay;
  const double wm = p.cantilever.frequency;
  return tau * gradient / (p.cantilever.mass * (1.0 + tau * tau * wm * wm));
}

double renormalized_frequency(const SystemParams& p, double gradient) {
  const double wm = p.cantilever.frequency;
  const double sq = wm * wm - gradient / p.cantilever.mass;
  if (!(sq > 0.0)) {
    throw Error(ErrorKind::instability,
                "onset of mirror instability: dF/dx / (m omega_m^2) >= 1");
  }
  return std::sqrt(sq);
}

double stability_margin(const SystemParams& p, double gradient) {
  const double wm = p.cantilever.frequency;
  return 1.0 - gradient / (p.cantilever.mass * wm * wm);
}

double effective_temperature(const SystemParams& p, double photon_number) {
  const auto& m = p.cantilever;
  const double absorbed = p.cavity.absorption_rate * photon_number * hbar * p.cavity.frequency;
  return p.environment.temperature +
         absorbed * m.length / (m.averaging_factor * m.cross_section * m.thermal_conductivity);
}

namespace {

double occupation_temperature(const SystemParams& p, double photon_number,
                              const ModelOptions& options) {
  return options.thermal == ThermalConvention::effective_temperature
             ? effective_temperature(p, photon_number)
             : p.environment.temperature;
}

double delay_factor(const SystemParams& p) {
  const double wt = p.delay_phase();
  return (1.0 + wt * wt) / wt;
}

void require_cooling(const SystemParams& p, double gradient) {
  if (!(gradient > 0.0)) {
    throw Error(ErrorKind::heating_regime,
                "heating regime: photothermal force gradient is not positive "
                "(need 2 omega_c Delta > Delta^2 + Gamma_c^2/4)");
  }
  if (!(stability_margin(p, gradient) > 0.0)) {
    throw Error(ErrorKind::instability,
                "onset of mirror instability: dF/dx / (m omega_m^2) >= 1");
  }
}

double noise_population_closed_form(const SystemParams& p) {
  const double wc = p.cavity.frequency;
  const double gc = p.cavity.linewidth;
  const double delta = p.detuning();
  const double lorentz = delta * delta + lorentzian_width_sq(p);
  const double cooling = 2.0 * wc * delta - lorentz;
  const double wt = p.delay_phase();
  const double coupling = p.cantilever.deformation_coefficient * wc * p.cavity.length;
  const double rp = gc / p.cavity.absorption_rate / coupling * delay_factor(p) * wc * wc / cooling;
  const double ph = coupling / (2.0 * wt) * lorentz / cooling;
  return rp + ph;
}

}  // namespace

double classical_population(const SystemParams& p, const ModelOptions& options) {
  validate(p);
  const auto force = force_gradient_and_noise(p);
  require_cooling(p, force.gradient);
  const double nc = cavity_photon_number(p, 0.0);
  const double temperature = occupation_temperature(p, nc, options);
  const double wm = p.cantilever.frequency;
  const double wt = renormalized_frequency(p, force.gradient);
  return k_boltzmann * temperature * p.cantilever.mass * wm * wm /
         (hbar * wt * p.cantilever.quality_factor * force.gradient) * delay_factor(p);
}

DerivedQuantities occupation_budget(const SystemParams& p, const ModelOptions& options) {
  validate(p);
  DerivedQuantities d;
  d.pump_amplitude = pump_amplitude(p);
  d.photon_number = cavity_photon_number(p, 0.0);
  const auto force = force_gradient_and_noise(p);
  d.force_gradient = force.gradient;
  d.shot_noise_strength = force.noise;
  d.stability_margin = stability_margin(p, force.gradient);
  d.effective_temperature = effective_temperature(p, d.photon_number);
  const double temperature = occupation_temperature(p, d.photon_number, options);
  const double gamma_m = p.mechanical_damping();

  if (p.cavity.power == 0.0) {
    d.renormalized_frequency = p.cantilever.frequency;
    d.thermal_occupation = k_boltzmann * temperature / (hbar * d.renormalized_frequency);
    d.rp_occupation = p.detuning() != 0.0 ? radiation_pressure_terms(p).occupation : 0.0;
    d.classical_population = d.thermal_occupation;
    d.total_population = d.thermal_occupation;
    return d;
  }

  require_cooling(p, force.gradient);
  const auto rp = radiation_pressure_terms(p);
  d.rp_damping = rp.damping;
  d.rp_occupation = rp.occupation;
  d.ph_damping = photothermal_damping(p, force.gradient);
  d.renormalized_frequency = renormalized_frequency(p, force.gradient);
  d.ph_occupation = force.noise * force.noise /
                    (2.0 * hbar * p.cantilever.frequency * p.cantilever.thermal_delay *
                     force.gradient);
  d.thermal_occupation = k_boltzmann * temperature / (hbar * d.renormalized_frequency);
  d.total_population = (gamma_m * d.thermal_occupation + d.rp_damping * d.rp_occupation +
                        d.ph_damping * d.ph_occupation) /
                       (gamma_m + d.rp_damping + d.ph_damping);
  d.classical_population = classical_population(p, options);
  d.noise_population = noise_population_closed_form(p);
  return d;
}

}  // namespace photocool
