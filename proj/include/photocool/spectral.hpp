#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "photocool/model.hpp"
#include "photocool/params.hpp"

namespace photocool {

/// One-sided displacement PSD on an angular-frequency grid, normalized so that
/// <x^2> = (1/2pi) * integral_0^inf S(omega) d omega. Units m^2 s.
struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> total;
  std::vector<double> thermal;
  std::vector<double> radiation_pressure;
  std::vector<double> shot;
  std::string params_hash;
};

/// Coefficients of the Fourier-space equation of motion, evaluated once.
class LinearResponse {
 public:
  explicit LinearResponse(const SystemParams& p);
  LinearResponse(const SystemParams& p, const ModelOptions& options);

  /// D(w) = w_m^2 - w^2 + i w (Gamma_m + Gamma_rp) - gradient / (m (1 + i w tau))
  std::complex<double> denominator(double omega) const;

  /// One-sided force PSDs (N^2 s); the shot term includes the kernel filter.
  double thermal_force_psd() const { return thermal_force_psd_; }
  double rp_force_psd() const { return rp_force_psd_; }
  double shot_force_psd(double omega) const;

  /// Location where Re D vanishes (the actual resonance) and the total
  /// linewidth there, including the frequency-dependent photothermal damping.
  double resonance() const { return resonance_; }
  double linewidth() const { return linewidth_; }
  double renormalized_frequency() const { return renormalized_; }
  double mass() const { return mass_; }

 private:
  double omega_m2_ = 0.0;
  double damping_ = 0.0;
  double gradient_over_mass_ = 0.0;
  double tau_ = 0.0;
  double mass_ = 0.0;
  double thermal_force_psd_ = 0.0;
  double rp_force_psd_ = 0.0;
  double shot_strength_sq_ = 0.0;
  double resonance_ = 0.0;
  double linewidth_ = 0.0;
  double renormalized_ = 0.0;
};

std::complex<double> response_denominator(const SystemParams& p, double omega);

/// Grid from 0 to 20x the renormalized frequency with points concentrated
/// around the resonance (uniform in the Lorentzian phase), merged with a
/// uniform background grid.
std::vector<double> resonance_grid(const SystemParams& p, std::size_t points = 40000);

/// Per-source displacement PSD. Thermal force PSD is 4 m Gamma_m k T_bar
/// (classical), radiation pressure 4 m Gamma_rp hbar omega_m (n_rp + 1/2),
/// shot noise 2 N^2 / (1 + w^2 tau^2); each divided by m^2 |D(w)|^2.
Spectrum displacement_psd(const SystemParams& p, std::span<const double> freqs,
                          const ModelOptions& options = {});

/// Trapezoid <x^2> over the spectrum grid converted to a phonon number,
/// n = m omega_tilde <x^2> / hbar - 1/2.
double occupancy_from_psd(const Spectrum& spectrum, const SystemParams& p);

struct QuadratureResult {
  double occupation = 0.0;
  double variance = 0.0;  // <x^2>, m^2
  std::size_t evaluations = 0;
};

/// Adaptive quadrature of the total PSD (no grid), refined around the
/// resonance. `tolerance` is relative on <x^2>.
QuadratureResult spectral_occupancy(const SystemParams& p, const ModelOptions& options = {},
                                    double tolerance = 1e-8);

/// CSV with a `# params_hash=` line then omega_rad_s,S_total,S_th,S_rp,S_shot.
void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);

}  // namespace photocool
