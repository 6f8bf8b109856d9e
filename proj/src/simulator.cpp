#include "photocool/simulator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "photocool/constants.hpp"
#include "photocool/error.hpp"
#include "photocool/rng.hpp"

namespace photocool {

using constants::hbar;
using constants::k_boltzmann;
using constants::two_pi;

namespace {

struct Rates {
  double gradient = 0.0;
  double noise = 0.0;
  double rp_damping = 0.0;
  double rp_occupation = 0.0;
  double ph_damping = 0.0;
  double reference_frequency = 0.0;  // omega_tilde, or omega_m past the stability bound
  double temperature = 0.0;
  bool stable = true;
};

Rates rates_for(const SystemParams& p, const ModelOptions& options) {
  validate(p);
  Rates r;
  const auto force = force_gradient_and_noise(p);
  r.gradient = force.gradient;
  r.noise = force.noise;
  if (p.cavity.power > 0.0 && p.detuning() != 0.0) {
    const auto rp = radiation_pressure_terms(p);
    r.rp_damping = rp.damping;
    r.rp_occupation = rp.occupation;
  }
  r.ph_damping = photothermal_damping(p, r.gradient);
  r.stable = stability_margin(p, r.gradient) > 0.0;
  r.reference_frequency =
      r.stable ? renormalized_frequency(p, r.gradient) : p.cantilever.frequency;
  const double nc = cavity_photon_number(p, 0.0);
  r.temperature = options.thermal == ThermalConvention::effective_temperature
                      ? effective_temperature(p, nc)
                      : p.environment.temperature;
  return r;
}

double relaxation_rate(const SystemParams& p, const Rates& r) {
  const double total = p.mechanical_damping() + r.ph_damping + r.rp_damping;
  return total > 0.0 ? total : p.mechanical_damping();
}

}  // namespace

double SimTimescales::max_dt() const { return std::min({period, delay, relaxation}) / 50.0; }

SimTimescales timescales(const SystemParams& p) {
  const Rates r = rates_for(p, {});
  SimTimescales t;
  t.period = two_pi / r.reference_frequency;
  t.delay = p.cantilever.thermal_delay;
  t.relaxation = 1.0 / relaxation_rate(p, r);
  return t;
}

SimConfig default_sim_config(const SystemParams& p, std::uint64_t seed) {
  const auto t = timescales(p);
  SimConfig cfg;
  cfg.seed = seed;
  cfg.dt = t.max_dt();
  cfg.t_burn_in = 20.0 * t.relaxation;
  cfg.t_total = cfg.t_burn_in + 1000.0 * t.relaxation;
  cfg.record_stride =
      std::max<std::size_t>(1, static_cast<std::size_t>(t.period / 16.0 / cfg.dt));
  return cfg;
}

void validate(const SystemParams& p, const SimConfig& cfg) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::invalid_parameter, "invalid simulation config: " + what);
  };
  if (!(cfg.dt > 0.0)) fail("dt > 0");
  if (!(cfg.t_burn_in >= 0.0)) fail("t_burn_in >= 0");
  if (!(cfg.t_total > cfg.t_burn_in)) fail("t_total > t_burn_in");
  if (cfg.ensemble < 1) fail("ensemble >= 1");
  if (cfg.record_stride < 1) fail("record_stride >= 1");
  const auto t = timescales(p);
  if (cfg.dt > t.max_dt() * (1.0 + 1e-12)) {
    fail("dt = " + format_g(cfg.dt) + " exceeds min(period, tau, relaxation)/50 = " +
         format_g(t.max_dt()));
  }
  if (cfg.t_total - cfg.t_burn_in < 100.0 * t.relaxation * (1.0 - 1e-12)) {
    fail("recorded span shorter than 100 relaxation times (" +
         format_g(100.0 * t.relaxation) + " s)");
  }
}

double kernel_lowpass_step(double force, double target, double dt, double tau) {
  return target + (force - target) * std::exp(-dt / tau);
}

double kernel_lowpass_step_linear(double force, double target_begin, double target_end,
                                  double dt, double tau) {
  const double a = dt / tau;
  const double decay = std::exp(-a);
  // (1 - e^-a) / a without cancellation for small a.
  const double phi = a > 1e-8 ? -std::expm1(-a) / a : 1.0 - 0.5 * a;
  return force * decay + target_end - target_begin * decay - (target_end - target_begin) * phi;
}

Trajectory integrate(const SystemParams& p, const SimConfig& cfg, std::uint64_t member,
                     const ModelOptions& options) {
  validate(p, cfg);
  const Rates r = rates_for(p, options);
  const auto& m = p.cantilever;

  const double mass = m.mass;
  const double stiffness = mass * m.frequency * m.frequency;
  const double gamma_m = p.mechanical_damping();
  const double damping = gamma_m + r.rp_damping;
  const double dt = cfg.dt;
  const double half = 0.5 * dt;
  const double tau = m.thermal_delay;

  // Momentum OU stage: exact for friction + white force of two-sided strength D.
  const double p_decay = std::exp(-damping * dt);
  const double ou_factor = damping > 0.0 ? -std::expm1(-2.0 * damping * dt) / (2.0 * damping) : dt;
  const double thermal_strength = 2.0 * mass * gamma_m * k_boltzmann * r.temperature;
  const double rp_strength = 2.0 * mass * r.rp_damping * hbar * m.frequency * (r.rp_occupation + 0.5);
  const double thermal_sd = cfg.noise.thermal ? std::sqrt(thermal_strength * ou_factor) : 0.0;
  const double rp_sd = cfg.noise.radiation_pressure ? std::sqrt(rp_strength * ou_factor) : 0.0;
  // Shot noise enters F_def and is filtered by the relaxation exactly.
  const double a = dt / tau;
  const double f_decay = std::exp(-a);
  const double f_phi = a > 1e-8 ? -std::expm1(-a) / a : 1.0 - 0.5 * a;
  const double shot_sd =
      cfg.noise.shot ? r.noise * std::sqrt(-std::expm1(-2.0 * a) / (2.0 * tau)) : 0.0;

  // Nonlinear deformation force relative to its x = 0 value.
  const double photon_energy = hbar * p.cavity.frequency;
  const double deformation = m.deformation_coefficient * photon_energy * p.cavity.absorption_rate;
  const double nc0 = cavity_photon_number(p, 0.0);
  const double length_c = p.cavity.length;
  auto target = [&](double x) {
    if (!cfg.nonlinear_cavity) return r.gradient * x;
    if (!(std::abs(x) < length_c)) return std::numeric_limits<double>::quiet_NaN();
    return deformation * ((1.0 - x / length_c) * cavity_photon_number(p, x) - nc0);
  };
  auto shot_scale = [&](double x) { return cfg.nonlinear_cavity ? 1.0 - x / length_c : 1.0; };

  const double w_ref = r.reference_frequency;
  const double n_th = k_boltzmann * r.temperature / (hbar * w_ref);
  const double limit =
      1e3 * std::sqrt(hbar / (2.0 * mass * w_ref)) * std::sqrt(2.0 * n_th + 1.0);

  GaussianStream thermal_rng(cfg.seed, member, Stream::thermal);
  GaussianStream shot_rng(cfg.seed, member, Stream::shot);
  GaussianStream rp_rng(cfg.seed, member, Stream::radiation_pressure);
  GaussianStream init_rng(cfg.seed, member, Stream::initial_state);

  const double x_rms = std::sqrt(k_boltzmann * r.temperature / (mass * w_ref * w_ref));
  const double p_rms = std::sqrt(mass * k_boltzmann * r.temperature);
  const double x_init_draw = init_rng();
  const double p_init_draw = init_rng();
  double x = cfg.x0.value_or(x_rms * x_init_draw);
  double mom = cfg.p0.value_or(p_rms * p_init_draw);
  double force = target(x);

  const auto steps = static_cast<std::size_t>(std::llround(cfg.t_total / dt));
  const auto first_recorded = static_cast<std::size_t>(std::llround(cfg.t_burn_in / dt));

  Trajectory traj;
  traj.seed = cfg.seed;
  traj.member = member;
  traj.config = cfg;
  traj.sample_interval = dt * static_cast<double>(cfg.record_stride);
  const std::size_t expected = (steps - first_recorded) / cfg.record_stride + 1;
  traj.times.reserve(expected);
  traj.x.reserve(expected);
  traj.p.reserve(expected);
  traj.force.reserve(expected);

  auto record = [&](std::size_t step) {
    traj.times.push_back(static_cast<double>(step) * dt);
    traj.x.push_back(x);
    traj.p.push_back(mom);
    traj.force.push_back(force);
  };
  if (first_recorded == 0) record(0);

  for (std::size_t step = 1; step <= steps; ++step) {
    // B A O A B splitting; the relaxation of F_ph is advanced between the
    // drifts and the closing kick, driven by x varying linearly over the step.
    mom += half * (force - stiffness * x);
    const double x_begin = x;
    x += half * mom / mass;
    mom *= p_decay;
    if (thermal_sd > 0.0) mom += thermal_sd * thermal_rng();
    if (rp_sd > 0.0) mom += rp_sd * rp_rng();
    x += half * mom / mass;
    const double drive_begin = target(x_begin);
    const double drive_end = target(x);
    // kernel_lowpass_step_linear with the step constants hoisted.
    force = force * f_decay + drive_end - drive_begin * f_decay -
            (drive_end - drive_begin) * f_phi;
    if (shot_sd > 0.0) force += shot_sd * shot_scale(x_begin) * shot_rng();
    mom += half * (force - stiffness * x);

    if (!std::isfinite(x) || !std::isfinite(mom) || !std::isfinite(force)) {
      traj.status = RunStatus::nan;
      traj.diagnostic = "non-finite state at t = " + format_g(step * dt) + " s";
      break;
    }
    if (std::abs(x) > limit) {
      traj.status = RunStatus::diverged;
      traj.diagnostic = "instability detected: |x| = " + format_g(std::abs(x)) +
                        " m exceeds " + format_g(limit) + " m at t = " +
                        format_g(step * dt) + " s";
      record(step);
      break;
    }
    if (step >= first_recorded && (step - first_recorded) % cfg.record_stride == 0) record(step);
  }
  return traj;
}

Trajectory simulate(const SystemParams& p, const SimConfig& cfg, std::uint64_t member,
                    const ModelOptions& options) {
  Trajectory traj = integrate(p, cfg, member, options);
  if (traj.status == RunStatus::diverged) {
    throw Error(ErrorKind::instability_detected, traj.diagnostic);
  }
  if (traj.status == RunStatus::nan) throw Error(ErrorKind::nan_detected, traj.diagnostic);
  return traj;
}

BlockSeries block_series(const Trajectory& traj, const SystemParams& p) {
  const Rates r = rates_for(p, {});
  const double block_time = 20.0 / relaxation_rate(p, r);
  const auto per_block = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(block_time / traj.sample_interval)));
  BlockSeries out;
  const std::size_t blocks = traj.x.size() / per_block;
  for (std::size_t b = 0; b < blocks; ++b) {
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = b * per_block; i < (b + 1) * per_block; ++i) {
      s += traj.x[i];
      s2 += traj.x[i] * traj.x[i];
    }
    out.mean.push_back(s / static_cast<double>(per_block));
    out.mean_square.push_back(s2 / static_cast<double>(per_block));
  }
  return out;
}

namespace {

struct MeanError {
  double mean = 0.0;
  double error = 0.0;
};

MeanError mean_and_error(std::span<const double> v) {
  MeanError out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.error = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return out;
}

}  // namespace

OccupancyEstimate estimate_occupancy(std::span<const BlockSeries> series, const SystemParams& p) {
  const double w = renormalized_frequency(p, force_gradient_and_noise(p).gradient);
  const double scale = p.cantilever.mass * w / hbar;

  double grand_mean = 0.0;
  std::size_t count = 0;
  for (const auto& s : series) {
    for (double v : s.mean) grand_mean += v;
    count += s.mean.size();
  }
  if (count < 2) {
    throw Error(ErrorKind::nonstationary_trajectory,
                "too few blocks (" + std::to_string(count) + ") to estimate the occupancy");
  }
  grand_mean /= static_cast<double>(count);

  std::vector<double> all, first, second;
  for (const auto& s : series) {
    const std::size_t n = s.mean_square.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double occ = scale * (s.mean_square[i] - grand_mean * grand_mean) - 0.5;
      all.push_back(occ);
      (2 * i < n ? first : second).push_back(occ);
    }
  }
  const auto total = mean_and_error(all);
  if (first.size() >= 2 && second.size() >= 2) {
    const auto a = mean_and_error(first);
    const auto b = mean_and_error(second);
    const double sigma = std::hypot(a.error, b.error);
    if (std::abs(a.mean - b.mean) > 3.0 * sigma) {
      throw Error(ErrorKind::nonstationary_trajectory,
                  "first/second half occupations differ: " + format_g(a.mean) + " vs " +
                      format_g(b.mean) + " (3 sigma = " + format_g(3.0 * sigma) + ")");
    }
  }
  return {total.mean, total.error, all.size()};
}

OccupancyEstimate estimate_occupancy(const Trajectory& traj, const SystemParams& p) {
  const BlockSeries s = block_series(traj, p);
  return estimate_occupancy(std::span<const BlockSeries>(&s, 1), p);
}

namespace {

std::mutex fftw_planner_mutex;

}  // namespace

Spectrum welch_psd(std::span<const Trajectory> trajectories, std::size_t segments,
                   double period) {
  if (trajectories.empty()) throw Error(ErrorKind::too_few_segments, "no trajectories");
  if (segments < 8) {
    throw Error(ErrorKind::too_few_segments,
                "Welch estimate needs >= 8 segments, got " + std::to_string(segments));
  }
  const auto& ref = trajectories.front();
  const std::size_t n = ref.x.size();
  for (const auto& t : trajectories) {
    if (t.x.size() != n || t.sample_interval != ref.sample_interval) {
      throw Error(ErrorKind::invalid_parameter, "pooled trajectories must share sampling");
    }
  }
  // 50% overlap: n = (segments + 1) * length / 2.
  const std::size_t length = 2 * n / (segments + 1);
  const double fs = 1.0 / ref.sample_interval;
  if (period > 0.0 && static_cast<double>(length) * ref.sample_interval < 50.0 * period) {
    throw Error(ErrorKind::too_few_segments,
                "segments of " + format_g(length * ref.sample_interval) +
                    " s are shorter than 50 mechanical periods");
  }
  if (length < 16) {
    throw Error(ErrorKind::too_few_segments, "segments too short (" + std::to_string(length) +
                                                 " samples)");
  }
  const std::size_t hop = length / 2;

  std::vector<double> window(length);
  double window_power = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / static_cast<double>(length));
    window_power += window[i] * window[i];
  }

  const std::size_t bins = length / 2 + 1;
  std::vector<double> accum(bins, 0.0);
  double* in = fftw_alloc_real(length);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(length), in, out, FFTW_ESTIMATE);
  }
  std::size_t used = 0;
  for (const auto& t : trajectories) {
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t start = s * hop;
      if (start + length > n) break;
      double mean = 0.0;
      for (std::size_t i = 0; i < length; ++i) mean += t.x[start + i];
      mean /= static_cast<double>(length);
      for (std::size_t i = 0; i < length; ++i) in[i] = (t.x[start + i] - mean) * window[i];
      fftw_execute(plan);
      for (std::size_t k = 0; k < bins; ++k) {
        const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
        const bool edge = k == 0 || (length % 2 == 0 && k == bins - 1);
        accum[k] += (edge ? 1.0 : 2.0) * mag2 / (fs * window_power);
      }
      ++used;
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  if (used < 8) {
    throw Error(ErrorKind::too_few_segments, "only " + std::to_string(used) + " full segments");
  }

  Spectrum spec;
  spec.freqs.resize(bins);
  spec.total.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    spec.freqs[k] = two_pi * fs * static_cast<double>(k) / static_cast<double>(length);
    spec.total[k] = accum[k] / static_cast<double>(used);
  }
  spec.thermal.assign(bins, 0.0);
  spec.radiation_pressure.assign(bins, 0.0);
  spec.shot.assign(bins, 0.0);
  return spec;
}

Spectrum welch_psd(const Trajectory& trajectory, std::size_t segments, double period) {
  return welch_psd(std::span<const Trajectory>(&trajectory, 1), segments, period);
}

std::uint64_t trajectory_digest(const Trajectory& traj) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::vector<double>& v) {
    for (double d : v) {
      const auto bits = std::bit_cast<std::uint64_t>(d);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  };
  mix(traj.times);
  mix(traj.x);
  mix(traj.p);
  mix(traj.force);
  return h;
}

EnsembleResult simulate_ensemble(const SystemParams& p, const SimConfig& cfg, unsigned jobs,
                                 const ModelOptions& options, const MemberCallback& on_member) {
  validate(p, cfg);
  const std::size_t members = cfg.ensemble;
  EnsembleResult result;
  result.blocks.resize(members);
  result.digests.resize(members);
  std::vector<RunStatus> status(members, RunStatus::ok);
  std::vector<std::string> diagnostics(members);

  auto run_member = [&](std::size_t i) {
    Trajectory traj = integrate(p, cfg, i, options);
    status[i] = traj.status;
    diagnostics[i] = traj.diagnostic;
    result.digests[i] = trajectory_digest(traj);
    if (on_member) on_member(i, traj);
    if (traj.status == RunStatus::ok) result.blocks[i] = block_series(traj, p);
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), members));
  if (workers <= 1) {
    for (std::size_t i = 0; i < members; ++i) run_member(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < members; i += workers) run_member(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < members; ++i) {
    if (status[i] != RunStatus::ok) {
      result.status = status[i];
      result.diagnostic = "member " + std::to_string(i) + ": " + diagnostics[i];
      return result;
    }
  }
  result.occupancy = estimate_occupancy(result.blocks, p);
  return result;
}

CountStatistics shot_noise_counter(const SystemParams& p, double window, std::uint64_t seed,
                                   std::size_t windows) {
  if (!(window > 0.0) || windows < 2) {
    throw Error(ErrorKind::invalid_parameter, "counting window > 0 and >= 2 windows required");
  }
  const double rate = p.cavity.absorption_rate * cavity_photon_number(p, 0.0);
  const double expected = rate * window;
  CountStatistics stats;
  stats.windows = windows;
  if (!(expected > 0.0)) return stats;

  std::mt19937_64 engine(substream_seed(seed, 0, Stream::counting));
  std::poisson_distribution<long long> counts(expected);
  std::vector<double> samples(windows);
  for (auto& s : samples) s = static_cast<double>(counts(engine));
  stats.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(windows);
  double ss = 0.0;
  for (double s : samples) ss += (s - stats.mean) * (s - stats.mean);
  stats.variance = ss / static_cast<double>(windows - 1);
  stats.fano = stats.variance / stats.mean;
  // Sampling error of variance/mean for Poisson counts of mean lambda.
  const double w = static_cast<double>(windows);
  stats.fano_stderr = std::sqrt(2.0 / (w - 1.0) + 1.0 / (expected * w));
  return stats;
}

}  // namespace photocool
