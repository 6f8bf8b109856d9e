#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "photocool/model.hpp"
#include "photocool/params.hpp"
#include "photocool/spectral.hpp"

namespace photocool {

struct NoiseSources {
  bool thermal = true;
  bool shot = true;
  bool radiation_pressure = true;
};

struct SimConfig {
  double dt = 0.0;         // s
  double t_total = 0.0;    // s, including burn-in
  double t_burn_in = 0.0;  // s, not recorded
  std::uint64_t seed = 0;
  bool nonlinear_cavity = false;  // full n_c(x) instead of the linearized force
  std::size_t ensemble = 1;
  std::size_t record_stride = 1;  // keep every k-th step
  NoiseSources noise;
  std::optional<double> x0;  // initial state; thermal draw when unset
  std::optional<double> p0;
};

/// Rates and time scales that bound dt and the run length.
struct SimTimescales {
  double period = 0.0;      // 2 pi / omega_tilde (omega_m when unstable)
  double delay = 0.0;       // tau
  double relaxation = 0.0;  // 1 / (Gamma_m + Gamma_ph + Gamma_rp)
  double max_dt() const;    // min(period, delay, relaxation) / 50
};

SimTimescales timescales(const SystemParams& p);

/// dt = max_dt, burn-in 20 relaxation times, 1000 recorded relaxation
/// times, stride chosen for ~16 samples per period.
SimConfig default_sim_config(const SystemParams& p, std::uint64_t seed);

/// Throws invalid_parameter when dt is too coarse or the run too short.
void validate(const SystemParams& p, const SimConfig& cfg);

enum class RunStatus { ok, diverged, nan };

struct Trajectory {
  std::vector<double> times;
  std::vector<double> x;
  std::vector<double> p;
  std::vector<double> force;  // filtered photothermal force state
  std::uint64_t seed = 0;
  std::uint64_t member = 0;
  double sample_interval = 0.0;
  SimConfig config;
  RunStatus status = RunStatus::ok;
  std::string diagnostic;
};

/// Exponential-integrator update of tau dF/dt = F_def - F with F_def held
/// constant over the step. Unconditionally stable.
double kernel_lowpass_step(double force, double target, double dt, double tau);

/// Same relaxation with F_def varying linearly from `target_begin` to
/// `target_end` across the step; exact for piecewise-linear drive.
double kernel_lowpass_step_linear(double force, double target_begin, double target_end,
                                  double dt, double tau);

/// Integrates one ensemble member. Divergence or NaN stops the run and is
/// reported through `status`; the samples up to that point are kept.
Trajectory integrate(const SystemParams& p, const SimConfig& cfg, std::uint64_t member = 0,
                     const ModelOptions& options = {});

/// As integrate, but throws instability_detected / nan_detected.
Trajectory simulate(const SystemParams& p, const SimConfig& cfg, std::uint64_t member = 0,
                    const ModelOptions& options = {});

/// Block means of x and x^2 over segments of 20 relaxation times.
struct BlockSeries {
  std::vector<double> mean;
  std::vector<double> mean_square;
};

BlockSeries block_series(const Trajectory& traj, const SystemParams& p);

struct OccupancyEstimate {
  double n_hat = 0.0;
  double std_error = 0.0;
  std::size_t blocks = 0;
};

/// n_hat = m omega_tilde var(x) / hbar - 1/2 with a blocking standard error.
/// Throws nonstationary_trajectory when the first and second halves of the
/// blocks disagree by more than 3 sigma.
OccupancyEstimate estimate_occupancy(const Trajectory& traj, const SystemParams& p);
OccupancyEstimate estimate_occupancy(std::span<const BlockSeries> series, const SystemParams& p);

/// Hann-windowed, 50%-overlapped averaged periodogram of x, pooled over the
/// given trajectories; one-sided, normalized like Spectrum. Throws
/// too_few_segments for fewer than 8 segments or, when `period` > 0, for
/// segments shorter than 50 periods.
Spectrum welch_psd(std::span<const Trajectory> trajectories, std::size_t segments,
                   double period = 0.0);
Spectrum welch_psd(const Trajectory& trajectory, std::size_t segments, double period = 0.0);

std::uint64_t trajectory_digest(const Trajectory& traj);

struct EnsembleResult {
  OccupancyEstimate occupancy;
  std::vector<BlockSeries> blocks;
  std::vector<std::uint64_t> digests;
  RunStatus status = RunStatus::ok;
  std::string diagnostic;
};

using MemberCallback = std::function<void(std::size_t member, const Trajectory&)>;

/// Runs cfg.ensemble members on up to `jobs` threads. Results are indexed by
/// member, so the outcome does not depend on scheduling. `on_member` may be
/// called concurrently from worker threads.
EnsembleResult simulate_ensemble(const SystemParams& p, const SimConfig& cfg, unsigned jobs = 1,
                                 const ModelOptions& options = {},
                                 const MemberCallback& on_member = {});

struct CountStatistics {
  double mean = 0.0;
  double variance = 0.0;
  double fano = 0.0;
  double fano_stderr = 0.0;
  std::size_t windows = 0;
};

/// Counts absorbed photons in `windows` independent windows with the mirror
/// frozen at x = 0 (Poisson process of rate alpha n_c(0)).
CountStatistics shot_noise_counter(const SystemParams& p, double window, std::uint64_t seed,
                                   std::size_t windows = 10000);

}  // namespace photocool
