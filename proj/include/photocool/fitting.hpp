#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "photocool/model.hpp"
#include "photocool/params.hpp"

namespace photocool {

struct DataRow {
  double power = 0.0;        // W
  double temperature = 0.0;  // mode temperature, K
  std::optional<double> sigma;  // K
  std::size_t line = 0;      // source line, 0 when synthetic
};

/// Temperature-vs-power measurements. The device supplies every parameter
/// except the fitted ones and the power, which each row overrides.
struct Dataset {
  std::vector<DataRow> rows;
  SystemParams device;
};

/// >= 3 rows, positive temperatures, nonnegative distinct powers, positive
/// sigmas. Sorts rows by power. Throws validation_error naming the row line.
void validate(Dataset& data);

/// CSV with header `power_w,temperature_k[,sigma_k]`; `#` starts a comment.
/// Throws parse_error with the line number, or validation_error.
std::vector<DataRow> parse_dataset(std::istream& in);
std::vector<DataRow> load_dataset(const std::filesystem::path& path);

/// T_eff = n_tot hbar omega_tilde / k at input power `power`.
double predict_mode_temperature(const SystemParams& p, double power,
                                const ModelOptions& options = {});

enum class FitFree { chi, chi_epsilon, chi_epsilon_loss };

struct FitOptions {
  FitFree free = FitFree::chi;
  double initial_chi = 0.0;  // 0: take the device value, or 1e-5 s/m if unset
  int max_iterations = 200;
  ModelOptions model;
};

struct FitResult {
  double chi = 0.0;         // s/m
  double epsilon = 0.0;
  double loss_ratio = 0.0;  // Gamma_c / alpha
  std::vector<std::string> names;          // fitted parameters, in order
  std::vector<std::vector<double>> covariance;   // of the named parameters
  std::vector<std::vector<double>> correlation;
  bool weakly_identifiable = false;  // some |correlation| > 0.95
  std::vector<double> residuals;      // model - data, K
  std::vector<double> log_residuals;  // ln model - ln data
  double noise_population = 0.0;      // n_N at the largest power
  double chi2_per_dof = 0.0;
  int iterations = 0;
  SystemParams params;  // device with fitted values
};

/// Levenberg-Marquardt on log-temperature residuals with central-difference
/// Jacobian. Throws underdetermined when free parameters >= rows and
/// fit_diverged when the iteration does not converge.
FitResult fit(Dataset data, const FitOptions& options = {});

/// Synthetic rows from predict_mode_temperature, each temperature multiplied
/// by (1 + noise_fraction * xi) with xi standard normal.
Dataset synthesize_dataset(const SystemParams& device, const std::vector<double>& powers,
                           double noise_fraction, std::uint64_t seed,
                           const ModelOptions& options = {});

struct RecoveryStudy {
  std::vector<double> chi_hat;  // per seed
  double median_relative_error = 0.0;
};

/// Fits `seeds` synthetic datasets (seeds 0..seeds-1 derived from `seed`) in
/// parallel; results indexed by seed.
RecoveryStudy recovery_study(const SystemParams& device, const std::vector<double>& powers,
                             double noise_fraction, std::size_t seeds, std::uint64_t seed,
                             unsigned jobs = 1, const FitOptions& options = {});

}  // namespace photocool
