#pragma once

#include "photocool/params.hpp"

namespace photocool {

/// Which temperature feeds the thermal occupation and the classical
/// population. The effective temperature includes absorption heating; the bath
/// temperature reproduces the formulas without residual heating.
enum class ThermalConvention { effective_temperature, bath_temperature };

struct ModelOptions {
  ThermalConvention thermal = ThermalConvention::effective_temperature;
};

struct DerivedQuantities {
  double pump_amplitude = 0.0;          // E, rad/s
  double photon_number = 0.0;           // n_c(0)
  double force_gradient = 0.0;          // dF/dx, N/m
  double shot_noise_strength = 0.0;     // N, N s^(1/2)
  double rp_damping = 0.0;              // Gamma_rp, rad/s
  double rp_occupation = 0.0;           // n_m^rp
  double ph_damping = 0.0;              // Gamma_ph, rad/s
  double renormalized_frequency = 0.0;  // omega_m tilde, rad/s
  double ph_occupation = 0.0;           // n_m^ph
  double thermal_occupation = 0.0;      // n_m^th
  double classical_population = 0.0;   // n_m^C
  double noise_population = 0.0;        // n_m^N
  double total_population = 0.0;       // n_m^tot from the rate equation
  double effective_temperature = 0.0;   // T bar, K
  double stability_margin = 0.0;        // 1 - dF/dx / (m omega_m^2)
};

struct ForceCoefficients {
  double gradient = 0.0;  // N/m
  double noise = 0.0;     // N s^(1/2)
};

struct RadiationPressure {
  double damping = 0.0;
  double occupation = 0.0;
};

/// E = sqrt(Gamma_c P / (4 hbar omega_p)).
double pump_amplitude(const SystemParams& p);

/// Intracavity photon number with the mirror displaced by x (Lorentzian in the
/// effective detuning omega_c (1 - x/L_c) - omega_p).
double cavity_photon_number(const SystemParams& p, double x);

/// Linearized photothermal force about x = 0: gradient and shot-noise
/// coefficient. The constant force offset is absorbed into the origin.
ForceCoefficients force_gradient_and_noise(const SystemParams& p);

/// Bad-cavity radiation-pressure damping and noise occupation. Throws
/// degenerate_detuning at zero detuning, where the occupation diverges.
RadiationPressure radiation_pressure_terms(const SystemParams& p);

double photothermal_damping(const SystemParams& p, double gradient);

/// sqrt(omega_m^2 - gradient/m); throws instability past the stability bound.
double renormalized_frequency(const SystemParams& p, double gradient);

double stability_margin(const SystemParams& p, double gradient);

/// Mode-averaged cantilever temperature under constant illumination.
double effective_temperature(const SystemParams& p, double photon_number);

double classical_population(const SystemParams& p, const ModelOptions& options = {});

/// Fills every field of DerivedQuantities.
///
/// With P = 0 there is no optical force: the populations reduce to the thermal
/// occupation and the noise population is zero. With P > 0 the device must be
/// in the cooling regime (positive gradient, positive stability margin),
/// otherwise heating_regime or instability is thrown.
DerivedQuantities occupation_budget(const SystemParams& p, const ModelOptions& options = {});

}  // namespace photocool
