#pragma once

#include <vector>

#include "photocool/constants.hpp"
#include "photocool/model.hpp"
#include "photocool/params.hpp"

namespace fixtures {

/// Cryogenic set with Gamma_rp << Gamma_m << Gamma_ph and a sizable shot-noise
/// share (same values as configs/benchmark.json).
inline photocool::SystemParams benchmark() {
  photocool::SystemParams p;
  p.cavity.frequency = 1.772e15;
  p.cavity.length = 1e-4;
  p.cavity.linewidth = 1e10;
  p.cavity.absorption_rate = 1e9;
  p.cavity.pump_frequency = p.cavity.frequency - 0.5 * p.cavity.linewidth;
  p.cavity.power = 1.11395e-6;
  p.cantilever.frequency = photocool::constants::two_pi * 1e5;
  p.cantilever.mass = 1e-11;
  p.cantilever.quality_factor = 2e4;
  p.cantilever.thermal_delay = 1.0 / p.cantilever.frequency;
  p.cantilever.deformation_coefficient = 2e-4;
  p.cantilever.length = 2e-4;
  p.cantilever.cross_section = 1e-11;
  p.cantilever.thermal_conductivity = 150.0;
  p.cantilever.averaging_factor = 2.0;
  p.environment.temperature = 0.05;
  return p;
}

/// Ratio dF/dx / (m omega_m^2).
inline double gradient_ratio(const photocool::SystemParams& p) {
  return photocool::force_gradient_and_noise(p).gradient /
         (p.cantilever.mass * p.cantilever.frequency * p.cantilever.frequency);
}

/// Copy of p with the power rescaled so that dF/dx = g m omega_m^2 (the
/// gradient is linear in power at fixed detuning).
inline photocool::SystemParams with_gradient_ratio(photocool::SystemParams p, double g) {
  const double g0 = gradient_ratio(p);
  p.cavity.power *= g / g0;
  return p;
}

}  // namespace fixtures

namespace fixtures {

/// Strongly damped variant (omega_m tau = 5, dF/dx = 0.1 m omega_m^2) whose
/// relaxation time is short, so simulations need few steps.
inline photocool::SystemParams fast_cooling() {
  photocool::SystemParams p = benchmark();
  p.cantilever.thermal_delay = 5.0 / p.cantilever.frequency;
  return with_gradient_ratio(p, 0.1);
}

/// No light, low Q: a bare damped oscillator in a thermal bath.
inline photocool::SystemParams dark_oscillator() {
  photocool::SystemParams p = benchmark();
  p.cavity.power = 0.0;
  p.cantilever.quality_factor = 200.0;
  p.cantilever.thermal_delay = 1e-3;
  return p;
}

}  // namespace fixtures

namespace fixtures {

/// Room-temperature 46 kHz cantilever in a short lossy cavity (same values as
/// configs/metzger08.json): cools from 300 K to about 32 K near 22 mW at
/// chi = 2e-5 s/m.
inline photocool::SystemParams metzger_like() {
  photocool::SystemParams p;
  p.cavity.frequency = 1.772e15;
  p.cavity.length = 1e-6;
  p.cavity.linewidth = 1.36e12;
  p.cavity.absorption_rate = 5.2e8;
  p.cavity.pump_frequency = p.cavity.frequency - 0.5 * p.cavity.linewidth;
  p.cavity.power = 0.02;
  p.cantilever.frequency = photocool::constants::two_pi * 46e3;
  p.cantilever.mass = 5e-12;
  p.cantilever.quality_factor = 2.2e3;
  p.cantilever.thermal_delay = 5e-4;
  p.cantilever.deformation_coefficient = 2e-5;
  p.cantilever.length = 220e-6;
  p.cantilever.cross_section = 1.5e-11;
  p.cantilever.thermal_conductivity = 150.0;
  p.cantilever.averaging_factor = 2.0;
  p.environment.temperature = 300.0;
  return p;
}

inline std::vector<double> metzger_powers() {
  std::vector<double> out;
  for (int i = 0; i < 10; ++i) out.push_back(2.2e-3 * (i + 1));
  return out;
}

}  // namespace fixtures
