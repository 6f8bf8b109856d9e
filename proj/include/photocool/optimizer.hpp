#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "photocool/model.hpp"
#include "photocool/params.hpp"

namespace photocool {

/// Dimensionless inputs of the noise-population optimization.
struct OptInputs {
  double loss_ratio = 1.0;   // Gamma_c / alpha, >= 1
  double delay_phase = 1.0;  // omega_m tau
  double cavity_q = 1.0;     // Q_c = omega_c / Gamma_c
  double detuning = 0.5;     // Delta / Gamma_c
};

/// Throws invalid_parameter for out-of-range fields and heating_detuning when
/// the detuning is outside the cooling window 2 Q_c d - d^2 - 1/4 > 0.
void validate(const OptInputs& inp);

OptInputs opt_inputs(const SystemParams& p);

/// Coupling parameter A = omega_m tau / (chi omega_c L_c).
double coupling_parameter(const SystemParams& p);

/// 2 Q_c d - d^2 - 1/4; positive inside the cooling window.
double cooling_window(const OptInputs& inp);

struct NoiseTerms {
  double radiation_pressure = 0.0;  // grows linearly in A
  double photothermal = 0.0;        // falls as 1/A
  double total() const { return radiation_pressure + photothermal; }
};

NoiseTerms noise_terms(const OptInputs& inp, double coupling);

/// Noise population as a function of the coupling parameter A.
double noise_population_A(const OptInputs& inp, double coupling);

/// A at which the two noise terms are equal (the minimum over A).
double optimal_A(const OptInputs& inp);

/// Noise population at A = optimal_A.
double noise_floor(const OptInputs& inp);

/// Q_c -> infinity limit of noise_floor: bound * sqrt(1 + 1/(4 d^2)).
double noise_floor_large_q(const OptInputs& inp);

/// Absolute lower bound sqrt(G (1 + w^2) / (2 w^2)); the large-Q_c,
/// large-detuning limit.
double noise_bound(double loss_ratio, double delay_phase);

/// Detuning minimizing noise_floor at the given Q_c (numerical; no closed
/// form exists at finite Q_c). Golden-section search in log d inside the
/// cooling window.
double optimal_detuning(const OptInputs& inp);

struct NoiseOptimum {
  double noise_population = 0.0;  // at A_opt
  double coupling = 0.0;           // A_opt
  NoiseTerms breakdown;
  double large_q_limit = 0.0;
  double bound = 0.0;
  bool large_q = false;         // noise_floor within 1% of its large-Q_c limit
  bool large_detuning = false;  // large-Q_c limit within 1% of the bound
};

NoiseOptimum analyze_noise(const OptInputs& inp);

/// 3 sqrt(3) k T / (hbar omega_m Q_m) with the bath temperature.
double classical_bound(double temperature, double mechanical_frequency, double quality_factor);
double classical_bound(const SystemParams& p);

enum class FreeParameter { thermal_delay, deformation_coefficient, detuning, power };

std::string_view to_string(FreeParameter f);
/// Accepts tau, chi, A (alias for chi), detuning, power.
FreeParameter parse_free_parameter(std::string_view name);

/// n_C + n_N, or n_N alone. The noise objective is the natural one when only
/// chi varies: n_C falls without bound as chi grows.
enum class Objective { total, noise };

struct ParameterRange {
  FreeParameter parameter;
  double lower;
  double upper;
};

struct JointOptions {
  std::vector<ParameterRange> free;
  Objective objective = Objective::total;
  ModelOptions model;
  unsigned jobs = 1;
  std::size_t starts_per_dimension = 0;  // 0: 5 for up to two dimensions, else 3
  std::size_t max_evaluations = 5000;    // per Nelder-Mead run
  int restarts = 5;                      // penalty escalation rounds
};

struct JointResult {
  SystemParams params;
  std::vector<double> values;  // optimized parameter values, in `free` order
  double objective = 0.0;
  DerivedQuantities budget;
  double classical_bound = 0.0;
  double noise_bound = 0.0;
  double classical_ratio = 0.0;  // n_C / classical bound
  double noise_ratio = 0.0;      // n_N / noise bound
  bool classical_active = false;  // ratio below 1.1
  bool noise_active = false;
  std::size_t evaluations = 0;
  std::size_t feasible_starts = 0;
};

/// Penalized multi-start Nelder-Mead over the free parameters in log space.
/// Throws no_feasible_point if no start lies in the cooling regime.
JointResult joint_optimize(const SystemParams& p, const JointOptions& options);

/// Returns a copy of p with one parameter replaced.
SystemParams with_parameter(SystemParams p, FreeParameter f, double value);
double parameter_value(const SystemParams& p, FreeParameter f);

}  // namespace photocool
