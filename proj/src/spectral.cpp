#include "photocool/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

#include "photocool/constants.hpp"
#include "photocool/error.hpp"

namespace photocool {

using constants::hbar;
using constants::k_boltzmann;
using constants::pi;

LinearResponse::LinearResponse(const SystemParams& p) : LinearResponse(p, ModelOptions{}) {}

LinearResponse::LinearResponse(const SystemParams& p, const ModelOptions& options) {
  validate(p);
  const auto& m = p.cantilever;
  mass_ = m.mass;
  tau_ = m.thermal_delay;
  omega_m2_ = m.frequency * m.frequency;

  const auto force = force_gradient_and_noise(p);
  gradient_over_mass_ = force.gradient / m.mass;
  shot_strength_sq_ = force.noise * force.noise;

  double rp_damping = 0.0;
  double rp_occupation = 0.0;
  if (p.cavity.power > 0.0) {
    const auto rp = radiation_pressure_terms(p);
    rp_damping = rp.damping;
    rp_occupation = rp.occupation;
  }
  damping_ = p.mechanical_damping() + rp_damping;

  const double nc = cavity_photon_number(p, 0.0);
  const double temperature = options.thermal == ThermalConvention::effective_temperature
                                 ? effective_temperature(p, nc)
                                 : p.environment.temperature;
  thermal_force_psd_ = 4.0 * m.mass * p.mechanical_damping() * k_boltzmann * temperature;
  rp_force_psd_ = 4.0 * m.mass * rp_damping * hbar * m.frequency * (rp_occupation + 0.5);

  renormalized_ = photocool::renormalized_frequency(p, force.gradient);

  // Re D(w) = 0  <=>  w^2 = w_m^2 - (F'/m) / (1 + w^2 tau^2); contraction for
  // F'/m < w_m^2, converges in a handful of iterations.
  double w2 = renormalized_ * renormalized_;
  for (int i = 0; i < 200; ++i) {
    const double next = omega_m2_ - gradient_over_mass_ / (1.0 + w2 * tau_ * tau_);
    if (std::abs(next - w2) <= 1e-15 * w2) {
      w2 = next;
      break;
    }
    w2 = next;
  }
  resonance_ = std::sqrt(w2);
  linewidth_ = damping_ + tau_ * gradient_over_mass_ / (1.0 + w2 * tau_ * tau_);
}

std::complex<double> LinearResponse::denominator(double omega) const {
  using namespace std::complex_literals;
  const std::complex<double> kernel = 1.0 + 1i * omega * tau_;
  return omega_m2_ - omega * omega + 1i * omega * damping_ - gradient_over_mass_ / kernel;
}

double LinearResponse::shot_force_psd(double omega) const {
  return 2.0 * shot_strength_sq_ / (1.0 + omega * omega * tau_ * tau_);
}

std::complex<double> response_denominator(const SystemParams& p, double omega) {
  return LinearResponse(p).denominator(omega);
}

std::vector<double> resonance_grid(const SystemParams& p, std::size_t points) {
  const LinearResponse response(p);
  const double center = response.resonance();
  const double half_width = 0.5 * std::max(response.linewidth(), 1e-12 * center);
  const double top = 20.0 * std::max(center, response.renormalized_frequency());

  std::vector<double> grid;
  grid.reserve(points + points / 4 + 2);
  const double theta_lo = std::atan((0.0 - center) / half_width);
  const double theta_hi = std::atan((top - center) / half_width);
  for (std::size_t i = 0; i < points; ++i) {
    const double theta = theta_lo + (theta_hi - theta_lo) * static_cast<double>(i) /
                                        static_cast<double>(points - 1);
    grid.push_back(std::clamp(center + half_width * std::tan(theta), 0.0, top));
  }
  const std::size_t background = points / 4;
  for (std::size_t i = 0; i <= background; ++i) {
    grid.push_back(top * static_cast<double>(i) / static_cast<double>(background));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

namespace {

struct PsdComponents {
  double thermal, rp, shot;
};

PsdComponents psd_at(const LinearResponse& r, double omega) {
  const double gain = 1.0 / (r.mass() * r.mass() * std::norm(r.denominator(omega)));
  return {r.thermal_force_psd() * gain, r.rp_force_psd() * gain, r.shot_force_psd(omega) * gain};
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) sum += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return sum;
}

}  // namespace

Spectrum displacement_psd(const SystemParams& p, std::span<const double> freqs,
                          const ModelOptions& options) {
  const LinearResponse response(p, options);
  if (freqs.size() < 2 || !std::is_sorted(freqs.begin(), freqs.end())) {
    throw Error(ErrorKind::invalid_parameter, "frequency grid must be sorted with >= 2 points");
  }
  const double wt = response.renormalized_frequency();
  if (freqs.front() > wt / 10.0 || freqs.back() < 10.0 * wt) {
    throw Error(ErrorKind::grid_too_coarse,
                "grid must span at least [omega_tilde/10, 10 omega_tilde]");
  }
  const double lo = response.resonance() - 0.5 * response.linewidth();
  const double hi = response.resonance() + 0.5 * response.linewidth();
  const auto inside = std::count_if(freqs.begin(), freqs.end(),
                                    [&](double w) { return w >= lo && w <= hi; });
  if (inside < 20) {
    throw Error(ErrorKind::grid_too_coarse,
                "resonance undersampled: " + std::to_string(inside) +
                    " points within one linewidth (need 20)");
  }

  Spectrum s;
  s.params_hash = params_hash(p);
  s.freqs.assign(freqs.begin(), freqs.end());
  s.total.reserve(freqs.size());
  s.thermal.reserve(freqs.size());
  s.radiation_pressure.reserve(freqs.size());
  s.shot.reserve(freqs.size());
  for (double w : freqs) {
    const auto c = psd_at(response, w);
    s.thermal.push_back(c.thermal);
    s.radiation_pressure.push_back(c.rp);
    s.shot.push_back(c.shot);
    s.total.push_back(c.thermal + c.rp + c.shot);
  }
  return s;
}

double occupancy_from_psd(const Spectrum& spectrum, const SystemParams& p) {
  const double variance = trapezoid(spectrum.freqs, spectrum.total) / (2.0 * pi);
  const double wt = renormalized_frequency(p, force_gradient_and_noise(p).gradient);
  const double n = p.cantilever.mass * wt * variance / hbar - 0.5;
  if (n < -1e-3) {
    throw Error(ErrorKind::negative_occupancy,
                "occupancy " + std::to_string(n) + " < 0: spectrum integration failed");
  }
  return n;
}

namespace {

// Adaptive Simpson on [a, b]; fa, fm, fb are the endpoint and midpoint values.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth,
                        std::size_t& evals) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals);
}

}  // namespace

QuadratureResult spectral_occupancy(const SystemParams& p, const ModelOptions& options,
                                    double tolerance) {
  const LinearResponse response(p, options);
  const double center = response.resonance();
  const double half_width = 0.5 * response.linewidth();
  const double top = 40.0 * std::max(center, response.renormalized_frequency());

  QuadratureResult result;
  auto total_psd = [&](double w) {
    const auto c = psd_at(response, w);
    return c.thermal + c.rp + c.shot;
  };
  // Substitute w = center + h tan(theta): a Lorentzian becomes flat in theta.
  auto integrand = [&](double theta) {
    const double t = std::tan(theta);
    const double w = center + half_width * t;
    return total_psd(w) * half_width * (1.0 + t * t);
  };
  const double theta_lo = std::atan(-center / half_width);
  const double theta_hi = std::atan((top - center) / half_width);

  // Coarse pass fixes the absolute tolerance, then refine piece by piece.
  constexpr int pieces = 256;
  std::vector<double> edges(pieces + 1);
  for (int i = 0; i <= pieces; ++i) edges[i] = theta_lo + (theta_hi - theta_lo) * i / pieces;
  std::vector<double> fe(pieces + 1), fmid(pieces);
  double coarse = 0.0;
  for (int i = 0; i <= pieces; ++i) fe[i] = integrand(edges[i]);
  for (int i = 0; i < pieces; ++i) {
    fmid[i] = integrand(0.5 * (edges[i] + edges[i + 1]));
    coarse += (edges[i + 1] - edges[i]) / 6.0 * (fe[i] + 4.0 * fmid[i] + fe[i + 1]);
  }
  result.evaluations = 2 * pieces + 1;
  const double abs_tol = tolerance * std::abs(coarse) / pieces;
  double integral = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double whole = (edges[i + 1] - edges[i]) / 6.0 * (fe[i] + 4.0 * fmid[i] + fe[i + 1]);
    integral += adaptive_simpson(integrand, edges[i], edges[i + 1], fe[i], fmid[i], fe[i + 1],
                                 whole, abs_tol, 40, result.evaluations);
  }
  // Beyond `top` the PSD falls as w^-4.
  integral += total_psd(top) * top / 3.0;

  result.variance = integral / (2.0 * pi);
  result.occupation =
      p.cantilever.mass * response.renormalized_frequency() * result.variance / hbar - 0.5;
  return result;
}

void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
  out << "# params_hash=" << s.params_hash << "\n";
  out << "omega_rad_s,S_total,S_th,S_rp,S_shot\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < s.freqs.size(); ++i) {
    out << s.freqs[i] << ',' << s.total[i] << ',' << (i < s.thermal.size() ? s.thermal[i] : 0.0)
        << ',' << (i < s.radiation_pressure.size() ? s.radiation_pressure[i] : 0.0) << ','
        << (i < s.shot.size() ? s.shot[i] : 0.0) << '\n';
  }
  out.precision(old);
}

}  // namespace photocool
