#include "photocool/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "photocool/constants.hpp"
#include "photocool/error.hpp"

namespace photocool {

using constants::hbar;
using constants::k_boltzmann;

void validate(const OptInputs& inp) {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::invalid_parameter, "invalid optimization inputs: " + what);
  };
  if (!(inp.loss_ratio >= 1.0) || !std::isfinite(inp.loss_ratio)) fail("Gamma_c/alpha >= 1");
  if (!(inp.delay_phase > 0.0) || !std::isfinite(inp.delay_phase)) fail("omega_m tau > 0");
  if (!(inp.cavity_q > 0.0) || !std::isfinite(inp.cavity_q)) fail("Q_c > 0");
  if (!std::isfinite(inp.detuning)) fail("finite detuning");
  if (!(cooling_window(inp) > 0.0)) {
    throw Error(ErrorKind::heating_detuning,
                "detuning " + format_g(inp.detuning) +
                    " Gamma_c is outside the cooling window (2 Q_c d - d^2 - 1/4 <= 0)");
  }
}

OptInputs opt_inputs(const SystemParams& p) {
  OptInputs inp;
  inp.loss_ratio = p.cavity.linewidth / p.cavity.absorption_rate;
  inp.delay_phase = p.delay_phase();
  inp.cavity_q = p.cavity.frequency / p.cavity.linewidth;
  inp.detuning = p.detuning() / p.cavity.linewidth;
  return inp;
}

double coupling_parameter(const SystemParams& p) {
  return p.delay_phase() /
         (p.cantilever.deformation_coefficient * p.cavity.frequency * p.cavity.length);
}

double cooling_window(const OptInputs& inp) {
  return 2.0 * inp.cavity_q * inp.detuning - inp.detuning * inp.detuning - 0.25;
}

namespace {

double delay_weight(const OptInputs& inp) {
  const double w2 = inp.delay_phase * inp.delay_phase;
  return (1.0 + w2) / w2;
}

}  // namespace

NoiseTerms noise_terms(const OptInputs& inp, double coupling) {
  validate(inp);
  if (!(coupling > 0.0)) throw Error(ErrorKind::invalid_parameter, "A must be positive");
  const double window = cooling_window(inp);
  NoiseTerms t;
  t.radiation_pressure =
      inp.loss_ratio * delay_weight(inp) * inp.cavity_q * inp.cavity_q * coupling / window;
  t.photothermal = (inp.detuning * inp.detuning + 0.25) / (2.0 * coupling) / window;
  return t;
}

double noise_population_A(const OptInputs& inp, double coupling) {
  return noise_terms(inp, coupling).total();
}

double optimal_A(const OptInputs& inp) {
  validate(inp);
  const double w2 = inp.delay_phase * inp.delay_phase;
  return std::sqrt((inp.detuning * inp.detuning + 0.25) /
                   (2.0 * inp.loss_ratio * inp.cavity_q * inp.cavity_q) * w2 / (1.0 + w2));
}

double noise_floor(const OptInputs& inp) {
  validate(inp);
  return std::sqrt(2.0 * inp.loss_ratio * delay_weight(inp)) * inp.cavity_q *
         std::sqrt(inp.detuning * inp.detuning + 0.25) / cooling_window(inp);
}

double noise_floor_large_q(const OptInputs& inp) {
  validate(inp);
  return noise_bound(inp.loss_ratio, inp.delay_phase) *
         std::sqrt(1.0 + 1.0 / (4.0 * inp.detuning * inp.detuning));
}

double noise_bound(double loss_ratio, double delay_phase) {
  const double w2 = delay_phase * delay_phase;
  return std::sqrt(loss_ratio * (1.0 + w2) / (2.0 * w2));
}

double optimal_detuning(const OptInputs& inp) {
  OptInputs probe = inp;
  const double q = inp.cavity_q;
  if (!(q > 0.5)) {
    throw Error(ErrorKind::heating_detuning, "Q_c <= 1/2 leaves no cooling window");
  }
  // Roots of 2 Q_c d - d^2 - 1/4; the small one written without cancellation.
  const double disc = std::sqrt(q * q - 0.25);
  const double hi = q + disc;
  const double lo = 0.25 / hi;
  auto f = [&](double log_d) {
    probe.detuning = std::exp(log_d);
    const double window = cooling_window(probe);
    if (!(window > 0.0)) return std::numeric_limits<double>::infinity();
    return std::sqrt(probe.detuning * probe.detuning + 0.25) / window;
  };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(lo);
  double b = std::log(hi);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < 200 && b - a > 1e-13; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return std::exp(0.5 * (a + b));
}

NoiseOptimum analyze_noise(const OptInputs& inp) {
  NoiseOptimum out;
  out.coupling = optimal_A(inp);
  out.breakdown = noise_terms(inp, out.coupling);
  out.noise_population = noise_floor(inp);
  out.large_q_limit = noise_floor_large_q(inp);
  out.bound = noise_bound(inp.loss_ratio, inp.delay_phase);
  out.large_q = std::abs(out.noise_population / out.large_q_limit - 1.0) < 0.01;
  out.large_detuning = std::abs(out.large_q_limit / out.bound - 1.0) < 0.01;
  return out;
}

double classical_bound(double temperature, double mechanical_frequency, double quality_factor) {
  return 3.0 * std::sqrt(3.0) * k_boltzmann * temperature /
         (hbar * mechanical_frequency * quality_factor);
}

double classical_bound(const SystemParams& p) {
  return classical_bound(p.environment.temperature, p.cantilever.frequency,
                         p.cantilever.quality_factor);
}

std::string_view to_string(FreeParameter f) {
  switch (f) {
    case FreeParameter::thermal_delay: return "tau";
    case FreeParameter::deformation_coefficient: return "chi";
    case FreeParameter::detuning: return "detuning";
    case FreeParameter::power: return "power";
  }
  return "?";
}

FreeParameter parse_free_parameter(std::string_view name) {
  if (name == "tau") return FreeParameter::thermal_delay;
  if (name == "chi" || name == "A") return FreeParameter::deformation_coefficient;
  if (name == "detuning" || name == "delta") return FreeParameter::detuning;
  if (name == "power" || name == "P") return FreeParameter::power;
  throw Error(ErrorKind::validation_error,
              "unknown free parameter '" + std::string(name) +
                  "' (expected tau, chi, A, detuning, power)");
}

SystemParams with_parameter(SystemParams p, FreeParameter f, double value) {
  switch (f) {
    case FreeParameter::thermal_delay: p.cantilever.thermal_delay = value; break;
    case FreeParameter::deformation_coefficient: p.cantilever.deformation_coefficient = value; break;
    case FreeParameter::detuning: p.cavity.pump_frequency = p.cavity.frequency - value; break;
    case FreeParameter::power: p.cavity.power = value; break;
  }
  return p;
}

double parameter_value(const SystemParams& p, FreeParameter f) {
  switch (f) {
    case FreeParameter::thermal_delay: return p.cantilever.thermal_delay;
    case FreeParameter::deformation_coefficient: return p.cantilever.deformation_coefficient;
    case FreeParameter::detuning: return p.detuning();
    case FreeParameter::power: return p.cavity.power;
  }
  return 0.0;
}

namespace {

struct Evaluation {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  double violation = 0.0;
};

// Maps a point of the unit cube (log-scaled per coordinate) to parameters.
class Problem {
 public:
  Problem(const SystemParams& base, const JointOptions& options)
      : base_(base), options_(options) {
    for (const auto& r : options.free) {
      if (!(r.lower > 0.0) || !(r.upper > r.lower) || !std::isfinite(r.upper)) {
        throw Error(ErrorKind::invalid_parameter,
                    "bounds for " + std::string(to_string(r.parameter)) +
                        " must be finite with 0 < lower < upper");
      }
      log_lo_.push_back(std::log(r.lower));
      log_span_.push_back(std::log(r.upper) - std::log(r.lower));
    }
  }

  std::size_t dims() const { return log_lo_.size(); }

  std::vector<double> values(const std::vector<double>& u) const {
    std::vector<double> v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) v[i] = std::exp(log_lo_[i] + log_span_[i] * u[i]);
    return v;
  }

  SystemParams params(const std::vector<double>& u) const {
    SystemParams p = base_;
    const auto v = values(u);
    for (std::size_t i = 0; i < v.size(); ++i) p = with_parameter(p, options_.free[i].parameter, v[i]);
    return p;
  }

  Evaluation evaluate(const std::vector<double>& u) const {
    Evaluation e;
    for (double c : u) e.violation += std::max(0.0, -c) + std::max(0.0, c - 1.0);
    if (e.violation > 0.0) return e;
    const SystemParams p = params(u);
    try {
      const auto d = occupation_budget(p, options_.model);
      if (!(p.cavity.power > 0.0)) {
        e.violation = 1.0;
        return e;
      }
      const double value = options_.objective == Objective::total
                               ? d.classical_population + d.noise_population
                               : d.noise_population;
      if (!std::isfinite(value) || !(value > 0.0)) {
        e.violation = 1.0;
        return e;
      }
      e.feasible = true;
      e.objective = value;
    } catch (const Error&) {
      // Outside the cooling regime: measure how far, when the gradient exists.
      e.violation = 1.0;
      try {
        const double g = force_gradient_and_noise(p).gradient /
                         (p.cantilever.mass * p.cantilever.frequency * p.cantilever.frequency);
        e.violation += std::max(0.0, -g) + std::max(0.0, g - 1.0);
      } catch (const Error&) {
      }
    }
    return e;
  }

 private:
  SystemParams base_;
  const JointOptions& options_;
  std::vector<double> log_lo_;
  std::vector<double> log_span_;
};

struct RunResult {
  bool found = false;
  std::vector<double> point;
  double objective = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

bool better(double fa, const std::vector<double>& a, double fb, const std::vector<double>& b) {
  const double scale = std::max(std::abs(fa), std::abs(fb));
  if (std::abs(fa - fb) <= 1e-12 * scale) return a < b;
  return fa < fb;
}

// One penalized Nelder-Mead descent; tracks the best feasible point seen.
void nelder_mead(const Problem& problem, std::vector<double> start, double step, double reference,
                 double weight, std::size_t max_evaluations, RunResult& best) {
  const std::size_t n = start.size();
  auto penalized = [&](const std::vector<double>& u) {
    const Evaluation e = problem.evaluate(u);
    ++best.evaluations;
    if (e.feasible) {
      if (!best.found || better(e.objective, u, best.objective, best.point)) {
        best.found = true;
        best.objective = e.objective;
        best.point = u;
      }
      return e.objective;
    }
    return reference * (1.0 + weight * (1.0 + e.violation));
  };

  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += start[i] + step <= 1.0 ? step : -step;
  }
  std::vector<double> f(n + 1);
  for (std::size_t i = 0; i <= n; ++i) f[i] = penalized(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::size_t used = n + 1;
  while (used < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return better(f[a], simplex[a], f[b], simplex[b]);
    });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        diameter = std::max(diameter, std::abs(simplex[i][k] - simplex[lo][k]));
      }
    }
    if (diameter < 1e-11 && std::abs(f[hi] - f[lo]) <= 1e-14 * std::abs(f[lo])) break;
    if (diameter < 1e-13) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      std::vector<double> u(n);
      for (std::size_t k = 0; k < n; ++k) u[k] = centroid[k] + t * (simplex[hi][k] - centroid[k]);
      return u;
    };

    auto reflected = along(-1.0);
    const double fr = penalized(reflected);
    ++used;
    if (fr < f[lo]) {
      auto expanded = along(-2.0);
      const double fe = penalized(expanded);
      ++used;
      if (fe < fr) {
        simplex[hi] = expanded;
        f[hi] = fe;
      } else {
        simplex[hi] = reflected;
        f[hi] = fr;
      }
    } else if (fr < f[second]) {
      simplex[hi] = reflected;
      f[hi] = fr;
    } else {
      const bool outside = fr < f[hi];
      auto contracted = along(outside ? -0.5 : 0.5);
      const double fc = penalized(contracted);
      ++used;
      if (fc < std::min(fr, f[hi])) {
        simplex[hi] = contracted;
        f[hi] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == lo) continue;
          for (std::size_t k = 0; k < n; ++k) {
            simplex[i][k] = simplex[lo][k] + 0.5 * (simplex[i][k] - simplex[lo][k]);
          }
          f[i] = penalized(simplex[i]);
          ++used;
        }
      }
    }
  }
}

}  // namespace

JointResult joint_optimize(const SystemParams& p, const JointOptions& options) {
  if (options.free.empty()) {
    throw Error(ErrorKind::invalid_parameter, "joint_optimize needs at least one free parameter");
  }
  const Problem problem(p, options);
  const std::size_t dims = problem.dims();
  const std::size_t per_dim =
      options.starts_per_dimension > 0 ? options.starts_per_dimension : (dims <= 2 ? 5 : 3);

  // Deterministic start grid: cell centers of a per_dim^dims lattice.
  std::size_t total = 1;
  for (std::size_t i = 0; i < dims; ++i) total *= per_dim;
  std::vector<std::vector<double>> starts(total, std::vector<double>(dims));
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t idx = s;
    for (std::size_t k = 0; k < dims; ++k) {
      starts[s][k] = (static_cast<double>(idx % per_dim) + 0.5) / static_cast<double>(per_dim);
      idx /= per_dim;
    }
  }

  std::vector<RunResult> results(total);
  std::vector<char> feasible(total, 0);
  auto run = [&](std::size_t s) {
    const Evaluation e = problem.evaluate(starts[s]);
    if (!e.feasible) return;
    feasible[s] = 1;
    RunResult& r = results[s];
    r.found = true;
    r.point = starts[s];
    r.objective = e.objective;
    r.evaluations = 1;
    double weight = 1.0;
    double step = 0.5 / static_cast<double>(per_dim);
    for (int round = 0; round <= options.restarts; ++round) {
      nelder_mead(problem, r.point, step, e.objective, weight, options.max_evaluations, r);
      weight *= 10.0;
      step *= 0.1;
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, options.jobs), total));
  if (workers <= 1) {
    for (std::size_t s = 0; s < total; ++s) run(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < total; s += workers) run(s);
      });
    }
    for (auto& t : pool) t.join();
  }

  JointResult out;
  std::optional<std::size_t> winner;
  for (std::size_t s = 0; s < total; ++s) {
    out.evaluations += results[s].evaluations;
    if (!feasible[s]) continue;
    ++out.feasible_starts;
    const auto& r = results[s];
    if (!winner || better(r.objective, problem.values(r.point), results[*winner].objective,
                          problem.values(results[*winner].point))) {
      winner = s;
    }
  }
  if (!winner) {
    throw Error(ErrorKind::no_feasible_point,
                "no start point lies in the cooling regime within the given bounds (" +
                    std::to_string(total) + " starts tried)");
  }

  const auto& best = results[*winner];
  out.params = problem.params(best.point);
  out.values = problem.values(best.point);
  out.objective = best.objective;
  out.budget = occupation_budget(out.params, options.model);
  out.classical_bound = classical_bound(out.params);
  out.noise_bound = noise_bound(out.params.cavity.linewidth / out.params.cavity.absorption_rate,
                                out.params.delay_phase());
  out.classical_ratio = out.budget.classical_population / out.classical_bound;
  out.noise_ratio = out.budget.noise_population / out.noise_bound;
  out.classical_active = out.classical_ratio < 1.1;
  out.noise_active = out.noise_ratio < 1.1;
  return out;
}

}  // namespace photocool
