#include "photocool/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "photocool/constants.hpp"
#include "photocool/error.hpp"
#include "photocool/rng.hpp"

namespace photocool {

using constants::hbar;
using constants::k_boltzmann;

void validate(Dataset& data) {
  auto fail = [](const DataRow& r, const std::string& what) {
    const std::string where = r.line > 0 ? "line " + std::to_string(r.line) + ": " : "";
    throw Error(ErrorKind::validation_error, "dataset " + where + what);
  };
  for (const auto& r : data.rows) {
    if (!(r.power >= 0.0) || !std::isfinite(r.power)) fail(r, "power must be >= 0");
    if (!(r.temperature > 0.0) || !std::isfinite(r.temperature)) fail(r, "temperature must be > 0");
    if (r.sigma && !(*r.sigma > 0.0)) fail(r, "sigma must be > 0");
  }
  if (data.rows.size() < 3) {
    throw Error(ErrorKind::validation_error,
                "dataset needs at least 3 rows, got " + std::to_string(data.rows.size()));
  }
  std::stable_sort(data.rows.begin(), data.rows.end(),
                   [](const DataRow& a, const DataRow& b) { return a.power < b.power; });
  for (std::size_t i = 1; i < data.rows.size(); ++i) {
    if (data.rows[i].power == data.rows[i - 1].power) fail(data.rows[i], "duplicate abscissa");
  }
}

std::vector<DataRow> parse_dataset(std::istream& in) {
  std::vector<DataRow> rows;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  bool has_sigma = false;
  auto parse_error = [&](const std::string& what) {
    throw Error(ErrorKind::parse_error, "dataset line " + std::to_string(number) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) {
      f.erase(0, f.find_first_not_of(" \t"));
      f.erase(f.find_last_not_of(" \t") + 1);
      fields.push_back(f);
    }
    if (!header) {
      if (fields.size() == 2 && fields[0] == "power_w" && fields[1] == "temperature_k") {
        header = true;
      } else if (fields.size() == 3 && fields[0] == "power_w" && fields[1] == "temperature_k" &&
                 fields[2] == "sigma_k") {
        header = true;
        has_sigma = true;
      } else {
        parse_error("expected header power_w,temperature_k[,sigma_k]");
      }
      continue;
    }
    if (fields.size() != (has_sigma ? 3u : 2u)) {
      parse_error("expected " + std::to_string(has_sigma ? 3 : 2) + " fields, got " +
                  std::to_string(fields.size()));
    }
    auto number_of = [&](const std::string& f) {
      try {
        std::size_t used = 0;
        const double v = std::stod(f, &used);
        if (used != f.size()) parse_error("trailing characters in '" + f + "'");
        return v;
      } catch (const std::logic_error&) {
        parse_error("not a number: '" + f + "'");
      }
      return 0.0;
    };
    DataRow row;
    row.power = number_of(fields[0]);
    row.temperature = number_of(fields[1]);
    if (has_sigma) row.sigma = number_of(fields[2]);
    row.line = number;
    rows.push_back(row);
  }
  if (!header) throw Error(ErrorKind::parse_error, "dataset is empty (no header)");
  return rows;
}

std::vector<DataRow> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open dataset " + path.string());
  try {
    return parse_dataset(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

double predict_mode_temperature(const SystemParams& p, double power, const ModelOptions& options) {
  SystemParams q = p;
  q.cavity.power = power;
  const auto d = occupation_budget(q, options);
  const double w = power > 0.0 ? d.renormalized_frequency : q.cantilever.frequency;
  return d.total_population * hbar * w / k_boltzmann;
}

namespace {

constexpr double epsilon_min = 1.0;
constexpr double epsilon_max = 4.0;

std::size_t free_count(FitFree f) {
  switch (f) {
    case FitFree::chi: return 1;
    case FitFree::chi_epsilon: return 2;
    case FitFree::chi_epsilon_loss: return 3;
  }
  return 1;
}

// Internal coordinates: ln chi, epsilon (clamped), ln(Gamma_c/alpha) (>= 0).
struct Model {
  const Dataset& data;
  const FitOptions& options;
  std::size_t k;

  SystemParams params(const Eigen::VectorXd& theta) const {
    SystemParams p = data.device;
    p.cantilever.deformation_coefficient = std::exp(theta[0]);
    if (k >= 2) p.cantilever.averaging_factor = theta[1];
    if (k >= 3) p.cavity.absorption_rate = p.cavity.linewidth / std::exp(theta[2]);
    return p;
  }

  void project(Eigen::VectorXd& theta) const {
    if (k >= 2) theta[1] = std::clamp(theta[1], epsilon_min, epsilon_max);
    if (k >= 3) theta[2] = std::max(theta[2], 0.0);
  }

  // Gradient with components that push against an active bound removed.
  Eigen::VectorXd projected(const Eigen::VectorXd& theta, Eigen::VectorXd g) const {
    if (k >= 2 && ((theta[1] <= epsilon_min && g[1] > 0.0) || (theta[1] >= epsilon_max && g[1] < 0.0))) {
      g[1] = 0.0;
    }
    if (k >= 3 && theta[2] <= 0.0 && g[2] > 0.0) g[2] = 0.0;
    return g;
  }

  // Weighted log residuals; false when the model leaves the cooling regime.
  bool residuals(const Eigen::VectorXd& theta, Eigen::VectorXd& r) const {
    const SystemParams p = params(theta);
    r.resize(static_cast<Eigen::Index>(data.rows.size()));
    try {
      for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const auto& row = data.rows[i];
        const double t = predict_mode_temperature(p, row.power, options.model);
        const double scale = row.sigma ? *row.sigma / row.temperature : 1.0;
        r[static_cast<Eigen::Index>(i)] = (std::log(t) - std::log(row.temperature)) / scale;
      }
    } catch (const Error&) {
      return false;
    }
    return r.allFinite();
  }

  bool jacobian(const Eigen::VectorXd& theta, Eigen::MatrixXd& jac) const {
    jac.resize(static_cast<Eigen::Index>(data.rows.size()), static_cast<Eigen::Index>(k));
    Eigen::VectorXd up, down;
    for (std::size_t j = 0; j < k; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double h = 1e-6 * std::max(std::abs(theta[jj]), 1.0);
      Eigen::VectorXd tp = theta, tm = theta;
      tp[jj] += h;
      tm[jj] -= h;
      if (!residuals(tp, up) || !residuals(tm, down)) return false;
      jac.col(jj) = (up - down) / (2.0 * h);
    }
    return true;
  }
};

}  // namespace

FitResult fit(Dataset data, const FitOptions& options) {
  validate(data);
  const std::size_t k = free_count(options.free);
  if (k >= data.rows.size()) {
    throw Error(ErrorKind::underdetermined,
                std::to_string(k) + " free parameters need more than " +
                    std::to_string(data.rows.size()) + " rows");
  }
  const Model model{data, options, k};

  double chi0 = options.initial_chi;
  if (!(chi0 > 0.0)) chi0 = data.device.cantilever.deformation_coefficient;
  if (!(chi0 > 0.0)) chi0 = 1e-5;
  Eigen::VectorXd theta(static_cast<Eigen::Index>(k));
  theta[0] = std::log(chi0);
  if (k >= 2) theta[1] = data.device.cantilever.averaging_factor;
  if (k >= 3) {
    theta[2] = std::log(data.device.cavity.linewidth / data.device.cavity.absorption_rate);
  }
  model.project(theta);

  Eigen::VectorXd r;
  if (!model.residuals(theta, r)) {
    throw Error(ErrorKind::fit_diverged,
                "model is outside the cooling regime at the initial guess chi = " + format_g(chi0) +
                    " s/m");
  }
  double cost = 0.5 * r.squaredNorm();
  double lambda = 1e-3;
  Eigen::MatrixXd jac;
  bool converged = false;
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    if (!model.jacobian(theta, jac)) {
      throw Error(ErrorKind::fit_diverged, "Jacobian left the cooling regime");
    }
    Eigen::VectorXd gradient = jac.transpose() * r;
    Eigen::MatrixXd normal = jac.transpose() * jac;
    // Coordinates held at a bound are frozen for this step.
    const Eigen::VectorXd free_gradient = model.projected(theta, gradient);
    for (Eigen::Index j = 0; j < gradient.size(); ++j) {
      if (free_gradient[j] == gradient[j]) continue;
      gradient[j] = 0.0;
      normal.row(j).setZero();
      normal.col(j).setZero();
      normal(j, j) = 1.0;
    }
    if (gradient.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, 2.0 * cost) || cost == 0.0) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += lambda * normal.diagonal().cwiseMax(1e-300);
      Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      Eigen::VectorXd trial = theta + step;
      model.project(trial);
      Eigen::VectorXd r_trial;
      if (model.residuals(trial, r_trial)) {
        const double trial_cost = 0.5 * r_trial.squaredNorm();
        if (trial_cost <= cost) {
          const double drop = cost - trial_cost;
          const double moved = (trial - theta).norm();
          theta = trial;
          r = r_trial;
          cost = trial_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (drop <= 1e-12 * cost || moved <= 1e-12 * (1.0 + theta.norm())) {
            converged = true;
          }
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at any damping: a (possibly constrained) minimum.
      converged = true;
      break;
    }
    if (converged) break;
  }
  if (!converged) {
    throw Error(ErrorKind::fit_diverged,
                "no convergence after " + std::to_string(options.max_iterations) + " iterations");
  }

  FitResult out;
  out.iterations = iteration;
  out.params = model.params(theta);
  out.chi = out.params.cantilever.deformation_coefficient;
  out.epsilon = out.params.cantilever.averaging_factor;
  out.loss_ratio = out.params.cavity.linewidth / out.params.cavity.absorption_rate;

  const std::size_t n = data.rows.size();
  const bool weighted = std::all_of(data.rows.begin(), data.rows.end(),
                                    [](const DataRow& row) { return row.sigma.has_value(); });
  out.chi2_per_dof = 2.0 * cost / static_cast<double>(n - k);

  model.jacobian(theta, jac);
  const Eigen::MatrixXd normal = jac.transpose() * jac;
  Eigen::MatrixXd cov = normal.completeOrthogonalDecomposition().pseudoInverse();
  if (!weighted) cov *= out.chi2_per_dof;
  // Internal -> natural coordinates: d chi = chi d ln chi, d G = G d ln G.
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
  scale[0] = out.chi;
  out.names = {"chi"};
  if (k >= 2) out.names.push_back("epsilon");
  if (k >= 3) {
    scale[2] = out.loss_ratio;
    out.names.push_back("loss_ratio");
  }
  cov = scale.asDiagonal() * cov * scale.asDiagonal();
  out.covariance.assign(k, std::vector<double>(k));
  out.correlation.assign(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      out.covariance[i][j] = cov(ii, jj);
      const double denom = std::sqrt(cov(ii, ii) * cov(jj, jj));
      out.correlation[i][j] = denom > 0.0 ? cov(ii, jj) / denom : (i == j ? 1.0 : 0.0);
      if (i != j && std::abs(out.correlation[i][j]) > 0.95) out.weakly_identifiable = true;
    }
    // Also flag a parameter whose uncertainty exceeds its admissible span.
    const double sd = std::sqrt(out.covariance[i][i]);
    const double span = out.names[i] == "epsilon" ? epsilon_max - epsilon_min
                        : out.names[i] == "chi"   ? out.chi
                                                  : out.loss_ratio;
    if (!(sd < span)) out.weakly_identifiable = true;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = data.rows[i];
    const double t = predict_mode_temperature(out.params, row.power, options.model);
    out.residuals.push_back(t - row.temperature);
    out.log_residuals.push_back(std::log(t) - std::log(row.temperature));
  }
  SystemParams top = out.params;
  top.cavity.power = data.rows.back().power;
  out.noise_population = occupation_budget(top, options.model).noise_population;
  return out;
}

Dataset synthesize_dataset(const SystemParams& device, const std::vector<double>& powers,
                           double noise_fraction, std::uint64_t seed, const ModelOptions& options) {
  Dataset data;
  data.device = device;
  GaussianStream noise(seed, 0, Stream::synthetic_data);
  for (double power : powers) {
    DataRow row;
    row.power = power;
    const double xi = noise();
    row.temperature = predict_mode_temperature(device, power, options) * (1.0 + noise_fraction * xi);
    data.rows.push_back(row);
  }
  return data;
}

RecoveryStudy recovery_study(const SystemParams& device, const std::vector<double>& powers,
                             double noise_fraction, std::size_t seeds, std::uint64_t seed,
                             unsigned jobs, const FitOptions& options) {
  RecoveryStudy out;
  out.chi_hat.assign(seeds, 0.0);
  std::vector<std::string> failures(seeds);
  const double truth = device.cantilever.deformation_coefficient;
  auto run = [&](std::size_t i) {
    try {
      Dataset data = synthesize_dataset(device, powers, noise_fraction, splitmix64(seed + i),
                                        options.model);
      FitOptions local = options;
      // Start away from the truth so the study exercises the solver.
      if (!(local.initial_chi > 0.0)) local.initial_chi = 0.5 * truth;
      out.chi_hat[i] = fit(std::move(data), local).chi;
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), seeds));
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < seeds; i += workers) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < seeds; ++i) {
    if (!failures[i].empty()) {
      throw Error(ErrorKind::fit_diverged, "seed " + std::to_string(i) + ": " + failures[i]);
    }
  }
  std::vector<double> errors;
  for (double c : out.chi_hat) errors.push_back(std::abs(c / truth - 1.0));
  std::sort(errors.begin(), errors.end());
  if (!errors.empty()) {
    const std::size_t m = errors.size() / 2;
    out.median_relative_error =
        errors.size() % 2 ? errors[m] : 0.5 * (errors[m - 1] + errors[m]);
  }
  return out;
}

}  // namespace photocool
