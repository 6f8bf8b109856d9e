#pragma once

#include <string>

namespace photocool {

// All fields SI, all frequencies angular (rad/s).

struct CavityParams {
  double frequency = 0.0;        // omega_c
  double length = 0.0;           // equilibrium cavity length L_c, m
  double linewidth = 0.0;        // total photon loss rate Gamma_c
  double absorption_rate = 0.0;  // photon absorption rate alpha in the moving mirror
  double pump_frequency = 0.0;   // omega_p
  double power = 0.0;            // input optical power P, W
};

struct CantileverParams {
  double frequency = 0.0;             // omega_m
  double mass = 0.0;                  // effective mass, kg
  double quality_factor = 0.0;        // Q_m
  double thermal_delay = 0.0;         // tau, s
  double deformation_coefficient = 0.0;  // chi, s/m
  double length = 0.0;                // L_m, m
  double cross_section = 0.0;         // s, m^2
  double thermal_conductivity = 0.0;  // kappa, W/(m K)
  double averaging_factor = 2.0;      // epsilon; 2 is the arithmetic mean
};

struct EnvironmentParams {
  double temperature = 0.0;  // bath temperature, K
};

struct SystemParams {
  CavityParams cavity;
  CantileverParams cantilever;
  EnvironmentParams environment;

  /// Delta = omega_c - omega_p. Positive (red) detuning cools.
  double detuning() const { return cavity.frequency - cavity.pump_frequency; }
  /// Gamma_m = omega_m / Q_m.
  double mechanical_damping() const {
    return cantilever.frequency / cantilever.quality_factor;
  }
  double delay_phase() const {
    return cantilever.frequency * cantilever.thermal_delay;
  }
};

/// Throws Error(invalid_parameter) naming the first violated invariant.
void validate(const SystemParams& params);

/// Stable 64-bit digest of every field, rendered as 16 hex digits.
std::string params_hash(const SystemParams& params);

}  // namespace photocool
