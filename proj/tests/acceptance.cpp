// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "photocool/cli.hpp"
#include "photocool/config.hpp"
#include "photocool/constants.hpp"
#include "photocool/error.hpp"
#include "photocool/fitting.hpp"
#include "photocool/model.hpp"
#include "photocool/optimizer.hpp"
#include "photocool/simulator.hpp"
#include "photocool/spectral.hpp"

using namespace photocool;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path source_dir = PHOTOCOOL_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string f(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Minimum of the noise population over A by golden section in log A, with a
// bracket that does not use the closed-form optimum.
double min_over_A(const OptInputs& inp) {
  return oracle::golden_section_log([&](double a) { return noise_population_A(inp, a); }, 1e-16, 1e12, 1e-12).f;
}

// Brute-force minimum over A and the detuning at fixed Q_c.
double min_over_detuning(OptInputs inp) {
  const double q = inp.cavity_q;
  const double root = std::sqrt(q * q - 0.25);
  const double lo = (q - root) * (1.0 + 1e-9);
  const double hi = (q + root) * (1.0 - 1e-9);
  return oracle::golden_section_log(
             [&](double d) {
               inp.detuning = d;
               return min_over_A(inp);
             },
             lo, hi, 1e-10)
      .f;
}

// ---------------------------------------------------------------------------

Outcome noise_floor_bound() {
  Stopwatch clock;
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> qs = {1e2, 3e2, 1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6};
  int below = 0;
  int far = 0;
  double worst_low = std::numeric_limits<double>::infinity();  // min over draws of n/bound
  double worst_high = 0.0;  // max over draws of n/bound in the large-Q_c, large-detuning corner
  for (int i = 0; i < 10000; ++i) {
    OptInputs inp;
    inp.loss_ratio = std::pow(10.0, 3.0 * u(rng));
    inp.delay_phase = std::pow(10.0, -2.0 + 4.0 * u(rng));
    const double bound = noise_bound(inp.loss_ratio, inp.delay_phase);

    double best = std::numeric_limits<double>::infinity();
    for (double q : qs) {
      inp.cavity_q = q;
      best = std::min(best, min_over_detuning(inp));
    }
    if (best < bound * (1.0 - 1e-12)) ++below;
    worst_low = std::min(worst_low, best / bound);

    // Corner Q_c >= 1e5, detuning >= 1e2, optimized over A only.
    inp.cavity_q = 1e5 * std::pow(10.0, u(rng));
    inp.detuning = 1e2 * std::pow(10.0, u(rng));
    const double corner = min_over_A(inp) / bound;
    worst_high = std::max(worst_high, corner);
    if (corner > 1.05 || corner < 1.0 - 1e-12) ++far;
  }
  const double t = clock.seconds();
  Outcome o;
  o.pass = below == 0 && far == 0 && t < 60.0;
  o.detail = "1e4 draws; min n_N/bound = " + f("%.6f", worst_low) + " (" + std::to_string(below) +
             " below); corner max n_N/bound = " + f("%.5f", worst_high) + " (" + std::to_string(far) +
             " beyond 5%); " + f("%.1f s", t);
  return o;
}

Outcome a_opt_closed_form() {
  Stopwatch clock;
  std::mt19937_64 rng(2002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_a = 0.0;
  double worst_terms = 0.0;
  for (int i = 0; i < 100; ++i) {
    OptInputs inp;
    inp.loss_ratio = std::pow(10.0, 3.0 * u(rng));
    inp.delay_phase = std::pow(10.0, -2.0 + 4.0 * u(rng));
    inp.cavity_q = std::pow(10.0, 2.0 + 4.0 * u(rng));
    const double lo = std::log(0.25 / inp.cavity_q) + 0.1;
    const double hi = std::log(inp.cavity_q);
    inp.detuning = std::exp(lo + (hi - lo) * u(rng));
    const auto m =
        oracle::golden_section_log([&](double a) { return noise_population_A(inp, a); }, 1e-16, 1e12, 1e-13);
    worst_a = std::max(worst_a, std::abs(m.x / optimal_A(inp) - 1.0));
    const NoiseTerms t = noise_terms(inp, m.x);
    worst_terms = std::max(worst_terms, std::abs(t.radiation_pressure - t.photothermal) / t.total());
  }
  Outcome o;
  o.pass = worst_a < 1e-3 && worst_terms < 1e-6;
  o.detail = "100 draws; max |A_gs/A_opt - 1| = " + f("%.2e", worst_a) +
             ", max term mismatch at the numerical optimum = " + f("%.2e", worst_terms) + "; " +
             f("%.2f s", clock.seconds());
  return o;
}

Outcome classical_bound_check() {
  Stopwatch clock;
  ModelOptions opts;
  opts.thermal = ThermalConvention::bath_temperature;
  std::string detail;
  bool pass = true;
  for (const auto& [name, base] : {std::pair<std::string, SystemParams>{"benchmark", fixtures::benchmark()},
                                   {"metzger-like", fixtures::metzger_like()}}) {
    const double w_m = base.cantilever.frequency;
    auto n_c = [&](double g, double w) {
      SystemParams q = fixtures::with_gradient_ratio(base, g);
      q.cantilever.thermal_delay = w / w_m;
      return classical_population(q, opts);
    };
    const double bound = classical_bound(base);
    std::string seq;
    oracle::Minimum2 m;
    for (int zooms : {0, 2, 4, 8}) {
      m = oracle::grid_minimize(n_c, 1e-3, 1.0 - 1e-3, 0.1, 10.0, 41, zooms);
      seq += (seq.empty() ? "" : " -> ") + f("%.5f", m.f / bound);
    }
    const bool ok = std::abs(m.f / bound - 1.0) < 1e-2 && std::abs(m.y - 1.0) < 1e-2 && m.f >= bound * (1 - 1e-9);
    pass = pass && ok;
    detail += name + ": n_C/bound " + seq + " at omega_m tau = " + f("%.4f", m.y) + ", dF/dx = " +
              f("%.4f", m.x) + " m omega_m^2; ";
  }
  Outcome o;
  o.pass = pass;
  o.detail = detail + f("%.2f s", clock.seconds());
  return o;
}

Outcome table_reproduction() {
  const auto dir = source_dir / "configs";
  const std::vector<std::string> args = {"photocool",
                                         "table1",
                                         "--json",
                                         (dir / "verbridge08.json").string(),
                                         (dir / "metzger08.json").string(),
                                         (dir / "favero07.json").string()};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  Outcome o;
  if (code != 0) {
    o.detail = "table1 failed: " + err.str();
    return o;
  }
  const auto t = json::parse(out.str());
  const double worst = t["worst_factor_vs_published"].get<double>();
  o.pass = worst < 3.0 && t["convention_used"].is_string();
  o.detail = "convention used: " + t["convention_used"].get<std::string>() + "; worst factor " +
             f("%.3f", worst) + "; per convention:";
  for (const auto& c : t["convention_summary"]) {
    o.detail += " [" + c["convention"].get<std::string>() + ": " +
                f("%.2f", c["worst_factor_vs_published"].get<double>()) + "]";
  }
  return o;
}

Outcome oracle_triangle() {
  Stopwatch clock;
  const SystemParams p = fixtures::benchmark();
  const double rate = occupation_budget(p).total_population;
  const double quad = spectral_occupancy(p).occupation;
  SimConfig cfg = default_sim_config(p, 20240901);
  cfg.ensemble = 32;
  const auto mc = simulate_ensemble(p, cfg, workers());
  const double se = mc.occupancy.std_error;
  auto agree = [&](double a, double b, double stderr_) {
    return std::abs(a - b) <= std::max(0.02 * std::max(a, b), 3.0 * stderr_);
  };
  const double t = clock.seconds();
  Outcome o;
  o.pass = mc.status == RunStatus::ok && agree(rate, quad, 0.0) && agree(rate, mc.occupancy.n_hat, se) &&
           agree(quad, mc.occupancy.n_hat, se) && t < 300.0;
  o.detail = "rate " + f("%.3f", rate) + ", quadrature " + f("%.3f", quad) + ", simulation " +
             f("%.3f", mc.occupancy.n_hat) + " +- " + f("%.3f", se) + " (32 members, " +
             std::to_string(mc.occupancy.blocks) + " blocks); " + f("%.1f s", t);
  return o;
}

// Literal form F(t) = int_0^t h(t - s) dF_def/ds ds + h(t) F_def(0+), with
// h(t) = 1 - exp(-t/tau).
double literal_convolution(const std::function<double(double)>& u, const std::function<double(double)>& du,
                           double t, double tau) {
  auto h = [&](double s) { return 1.0 - std::exp(-s / tau); };
  const double jump = h(t) * u(0.0);
  if (t == 0.0) return 0.0;
  return jump + oracle::simpson([&](double s) { return h(t - s) * du(s); }, 0.0, t, 1e-15);
}

Outcome kernel_equivalence() {
  Stopwatch clock;
  const double tau = 1e-3;
  const int per_tau = 2000;
  const double dt = tau / per_tau;
  const int steps = 10 * per_tau;

  // Step input.
  double worst_step = 0.0;
  double fstep = 0.0;
  for (int i = 1; i <= steps; ++i) {
    fstep = kernel_lowpass_step(fstep, 1.0, dt, tau);
    if (i % 500 == 0) {
      auto one = [](double) { return 1.0; };
      auto zero = [](double) { return 0.0; };
      const double ref = literal_convolution(one, zero, i * dt, tau);
      worst_step = std::max(worst_step, std::abs(fstep - ref) / std::abs(ref));
    }
  }

  // Sinusoidal inputs at several frequencies.
  double worst_sine = 0.0;
  for (double wt : {0.3, 1.0, 3.0}) {
    const double w = wt / tau;
    auto u = [&](double t) { return std::sin(w * t); };
    auto du = [&](double t) { return w * std::cos(w * t); };
    double fs = 0.0;
    double scale = 0.0;
    std::vector<std::pair<double, double>> samples;
    for (int i = 0; i < steps; ++i) {
      fs = kernel_lowpass_step_linear(fs, u(i * dt), u((i + 1) * dt), dt, tau);
      scale = std::max(scale, std::abs(fs));
      if ((i + 1) % 500 == 0) samples.emplace_back((i + 1) * dt, fs);
    }
    for (const auto& [t, v] : samples) {
      worst_sine = std::max(worst_sine, std::abs(v - literal_convolution(u, du, t, tau)) / scale);
    }
  }
  const double t = clock.seconds();
  Outcome o;
  o.pass = worst_step < 1e-6 && worst_sine < 1e-6 && t < 1.0;
  o.detail = "max relative deviation: step " + f("%.2e", worst_step) + ", sinusoid " + f("%.2e", worst_sine) +
             " (omega tau = 0.3, 1, 3; dt = tau/2000); " + f("%.3f s", t);
  return o;
}

Outcome shot_noise_statistics() {
  Stopwatch clock;
  const SystemParams p = fixtures::benchmark();
  const double window = constants::two_pi / p.cantilever.frequency / 100.0;
  const auto c = shot_noise_counter(p, window, 31337, 10000);
  const double expected = p.cavity.absorption_rate * cavity_photon_number(p, 0.0) * window;
  const double t = clock.seconds();
  Outcome o;
  o.pass = std::abs(c.fano - 1.0) <= 3.0 * c.fano_stderr && t < 60.0;
  o.detail = "10^4 windows; mean count " + f("%.3f", c.mean) + " (expected " + f("%.3f", expected) +
             "), Fano " + f("%.4f", c.fano) + " +- " + f("%.4f", c.fano_stderr) + "; " + f("%.2f s", t);
  return o;
}

Outcome chi_recovery() {
  Stopwatch clock;
  const SystemParams p = fixtures::metzger_like();
  const auto study = recovery_study(p, fixtures::metzger_powers(), 0.02, 100, 77, workers());

  const auto dev = load_config(source_dir / "configs" / "metzger08.json");
  Dataset data;
  data.device = dev.params;
  data.rows = load_dataset(source_dir / "data" / "metzger_like.csv");
  const auto r = fit(data);
  const double chi_factor = std::max(r.chi / 2e-5, 2e-5 / r.chi);
  const double n_factor = std::max(r.noise_population / 1.4e4, 1.4e4 / r.noise_population);

  Outcome o;
  o.pass = study.median_relative_error < 0.05 && chi_factor < 3.0 && n_factor < 3.0;
  o.detail = "synthetic: median |chi_hat/chi - 1| = " + f("%.4f", study.median_relative_error) +
             " over 100 seeds; stand-in dataset (model-generated, not measured): chi = " + f("%.3e", r.chi) +
             " s/m, n_N = " + f("%.4g", r.noise_population) + "; " + f("%.1f s", clock.seconds());
  return o;
}

Outcome instability_onset() {
  Stopwatch clock;
  const SystemParams base = fixtures::fast_cooling();
  std::string flags;
  bool pass = true;
  double first_diverged = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < 20; ++i) {
    const double g = 0.81 + 0.02 * i;
    const SystemParams p = fixtures::with_gradient_ratio(base, g);
    SimConfig cfg = default_sim_config(p, 500 + static_cast<std::uint64_t>(i));
    cfg.t_total = cfg.t_burn_in + 300.0 * timescales(p).relaxation;
    const auto t = integrate(p, cfg);
    const bool diverged = t.status == RunStatus::diverged;
    flags += diverged ? 'X' : '.';
    if (diverged && std::isnan(first_diverged)) first_diverged = g;
    if (g <= 0.95 && diverged) pass = false;
    if (g >= 1.05 && !diverged) pass = false;
  }
  const double t = clock.seconds();
  Outcome o;
  o.pass = pass && t < 120.0;
  o.detail = "dF/dx / (m omega_m^2) from 0.81 to 1.19: " + flags + "; first divergence at " +
             f("%.2f", first_diverged) + "; " + f("%.1f s", t);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Stopwatch clock;
  const fs::path dir = fs::temp_directory_path() / "photocool_acceptance";
  fs::create_directories(dir);
  json doc = to_json(fixtures::fast_cooling());
  doc["name"] = "fast";
  const auto cfg = dir / "fast.json";
  std::ofstream(cfg) << doc.dump(2);

  auto run = [&](const std::string& tag) {
    const std::vector<std::string> args = {"photocool",     "simulate",
                                           "-c",            cfg.string(),
                                           "--seed",        "4242",
                                           "--ensemble",    "3",
                                           "--jobs",        "2",
                                           "--nonlinear",   "--json",
                                           "--trajectory",  (dir / (tag + ".bin")).string(),
                                           "--trajectory-csv", (dir / (tag + ".csv")).string(),
                                           "--spectrum",    (dir / (tag + "_psd.csv")).string()};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    std::string all = out.str();
    for (int m = 0; m < 3; ++m) {
      const std::string k = ".m" + std::to_string(m);
      all += slurp(dir / (tag + k + ".bin")) + slurp(dir / (tag + k + ".bin.json")) +
             slurp(dir / (tag + k + ".csv"));
    }
    return all + slurp(dir / (tag + "_psd.csv"));
  };
  const std::string a = run("a");
  const std::string b = run("b");
  // Artifacts name their own paths in the sidecars; compare with names aligned.
  std::string b_aligned = b;
  for (std::size_t pos; (pos = b_aligned.find("/b.")) != std::string::npos;) b_aligned.replace(pos, 3, "/a.");
  for (std::size_t pos; (pos = b_aligned.find("/b_psd")) != std::string::npos;) b_aligned.replace(pos, 6, "/a_psd");
  const bool sim_same = !a.empty() && a == b_aligned;

  const SystemParams p = fixtures::benchmark();
  const double window = constants::two_pi / p.cantilever.frequency / 100.0;
  const auto c1 = shot_noise_counter(p, window, 9, 2000);
  const auto c2 = shot_noise_counter(p, window, 9, 2000);
  const bool counts_same = c1.mean == c2.mean && c1.variance == c2.variance;

  const auto m = fixtures::metzger_like();
  const auto d1 = synthesize_dataset(m, fixtures::metzger_powers(), 0.02, 5);
  const auto d2 = synthesize_dataset(m, fixtures::metzger_powers(), 0.02, 5);
  bool data_same = d1.rows.size() == d2.rows.size();
  for (std::size_t i = 0; data_same && i < d1.rows.size(); ++i) {
    data_same = d1.rows[i].temperature == d2.rows[i].temperature;
  }
  const auto s1 = recovery_study(m, fixtures::metzger_powers(), 0.02, 8, 3, 2);
  const auto s2 = recovery_study(m, fixtures::metzger_powers(), 0.02, 8, 3, 2);
  const bool study_same = s1.chi_hat == s2.chi_hat;
  fs::remove_all(dir);

  Outcome o;
  o.pass = sim_same && counts_same && data_same && study_same;
  o.detail = std::string("simulate (3 members, nonlinear: report, binary+sidecar, CSV, PSD) ") +
             (sim_same ? "identical" : "DIFFER") + ", ~" + std::to_string(a.size() / 1024) +
             " KiB compared; photon counts " + (counts_same ? "identical" : "DIFFER") + "; synthetic data " +
             (data_same ? "identical" : "DIFFER") + "; recovery study " + (study_same ? "identical" : "DIFFER") +
             "; " + f("%.1f s", clock.seconds());
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"noise-floor bound", noise_floor_bound},
      {"A_opt closed form", a_opt_closed_form},
      {"classical bound", classical_bound_check},
      {"Table I reproduction", table_reproduction},
      {"oracle triangle", oracle_triangle},
      {"kernel equivalence", kernel_equivalence},
      {"shot-noise statistics", shot_noise_statistics},
      {"chi recovery", chi_recovery},
      {"instability onset", instability_onset},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
