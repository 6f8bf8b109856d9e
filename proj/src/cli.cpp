#include "photocool/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>

#include "photocool/config.hpp"
#include "photocool/constants.hpp"
#include "photocool/error.hpp"
#include "photocool/fitting.hpp"
#include "photocool/model.hpp"
#include "photocool/optimizer.hpp"
#include "photocool/report.hpp"
#include "photocool/simulator.hpp"
#include "photocool/spectral.hpp"
#include "photocool/trajectory_io.hpp"

namespace photocool {

using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config;
  std::string output;
  bool json = false;
  bool bath_temperature = false;

  ModelOptions model() const {
    ModelOptions m;
    if (bath_temperature) m.thermal = ThermalConvention::bath_temperature;
    return m;
  }
};

void add_common(CLI::App* cmd, CommonOptions& c, bool config_required = true) {
  auto* opt = cmd->add_option("--config,-c", c.config, "device config JSON");
  if (config_required) opt->required();
  cmd->add_option("--output,-o", c.output, "write the JSON report to this path");
  cmd->add_flag("--json", c.json, "print the JSON report instead of a table");
  cmd->add_flag("--bath-temperature", c.bath_temperature,
                "use the bath temperature instead of the heated effective temperature");
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw Error(ErrorKind::io_error, "cannot write " + path);
  return f;
}

void emit(const CommonOptions& c, const json& report, std::ostream& out,
          const std::function<void(std::ostream&)>& human) {
  if (!c.output.empty()) {
    auto f = open_output(c.output);
    f << report.dump(2) << '\n';
  }
  if (c.json) {
    out << report.dump(2) << '\n';
  } else {
    human(out);
  }
}

std::optional<std::uint64_t> parse_seed(const std::string& text, const std::string& origin) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::uint64_t>(v);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::validation_error, origin + ": not a 64-bit seed: '" + text + "'");
  }
}

std::uint64_t resolve_seed(const std::optional<std::string>& flag) {
  if (flag) return *parse_seed(*flag, "--seed");
  if (const char* env = std::getenv("PHOTOCOOL_SEED"); env && *env) {
    return *parse_seed(env, "PHOTOCOOL_SEED");
  }
  return 0;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------- analyze

json condition(bool holds, double value, std::string_view meaning) {
  return {{"holds", holds}, {"value", value}, {"meaning", std::string(meaning)}};
}

int cmd_analyze(const CommonOptions& c, std::ostream& out) {
  const DeviceConfig cfg = load_config(c.config);
  const SystemParams& p = cfg.params;
  const DerivedQuantities d = occupation_budget(p, c.model());

  const OptInputs inp = opt_inputs(p);
  const NoiseOptimum opt = analyze_noise(inp);
  const double coupling = coupling_parameter(p);
  const NoiseTerms at_device = noise_terms(inp, coupling);
  const double c_bound = classical_bound(p);
  const double thermal_ratio =
      p.cantilever.quality_factor /
      (constants::k_boltzmann * p.environment.temperature /
       (constants::hbar * p.cantilever.frequency));
  const double gamma_m = p.mechanical_damping();

  json report;
  report["command"] = "analyze";
  report["provenance"] = provenance(cfg);
  report["input"] = {{"config", cfg.source}, {"params", to_json(p)}};
  report["derived"] = to_json(d);
  report["bounds"] = {
      {"classical", quantity(c_bound, "1")},
      {"noise", quantity(opt.bound, "1")},
  };
  report["noise_optimization"] = {
      {"loss_ratio", quantity(inp.loss_ratio, "1")},
      {"delay_phase", quantity(inp.delay_phase, "1")},
      {"cavity_q", quantity(inp.cavity_q, "1")},
      {"detuning_over_linewidth", quantity(inp.detuning, "1")},
      {"coupling_A", quantity(coupling, "1")},
      {"coupling_A_opt", quantity(opt.coupling, "1")},
      {"noise_population_at_A", quantity(at_device.total(), "1")},
      {"rp_term_at_A", quantity(at_device.radiation_pressure, "1")},
      {"ph_term_at_A", quantity(at_device.photothermal, "1")},
      {"noise_floor", quantity(opt.noise_population, "1")},
      {"large_q_limit", quantity(opt.large_q_limit, "1")},
      {"large_q", opt.large_q},
      {"large_detuning", opt.large_detuning},
  };
  report["conditions"] = {
      {"stable", condition(d.stability_margin > 0.0, d.stability_margin,
                           "force gradient below m omega_m^2")},
      {"cooling", condition(d.force_gradient >= 0.0, d.force_gradient,
                            "positive force gradient (red detuning)")},
      {"high_mechanical_q", condition(thermal_ratio > 10.0, thermal_ratio,
                                      "Q_m >> k T / (hbar omega_m)")},
      {"high_cavity_q", condition(inp.cavity_q > 100.0, inp.cavity_q, "Q_c >> 1")},
      {"large_detuning", condition(opt.large_detuning, inp.detuning,
                                   "detuning large enough that the noise floor is near its bound")},
      {"chi_near_optimum",
       condition(std::abs(std::log(coupling / opt.coupling)) < std::log(1.1),
                 coupling / opt.coupling, "A within 10% of A_opt")},
      {"damping_hierarchy",
       condition(d.rp_damping < 0.1 * gamma_m && gamma_m < 0.1 * d.ph_damping,
                 d.ph_damping / gamma_m, "Gamma_rp << Gamma_m << Gamma_ph")},
      {"quantum_regime", condition(d.total_population < 1.0, d.total_population, "n_tot < 1")},
  };

  emit(c, report, out, [&](std::ostream& o) {
    o << "device: " << (cfg.name.empty() ? c.config : cfg.name) << "\n\n";
    TextTable t({"quantity", "value", "unit"});
    for (const auto& [key, q] : report["derived"].items()) {
      t.add({key, fmt(q["value"].get<double>()), q["unit"].get<std::string>()});
    }
    t.add({"classical_bound", fmt(c_bound), "1"});
    t.add({"noise_bound", fmt(opt.bound), "1"});
    t.add({"noise_floor_at_device_Q_c", fmt(opt.noise_population), "1"});
    t.add({"coupling_A / A_opt", fmt(coupling / opt.coupling), "1"});
    t.print(o);
    o << "\nconditions:\n";
    for (const auto& [key, v] : report["conditions"].items()) {
      o << "  " << (v["holds"].get<bool>() ? "[x] " : "[ ] ") << key << " ("
        << v["meaning"].get<std::string>() << ")\n";
    }
  });
  return 0;
}

// ----------------------------------------------------------------- table1

struct Convention {
  std::string name;
  double temperature;
  bool listed_as_angular;  // treat the listed frequency number as rad/s
};

const std::vector<Convention>& table_conventions() {
  static const std::vector<Convention> list = {
      {"300K, omega = 2 pi f", 300.0, false},
      {"300K, omega = f (listed number as rad/s)", 300.0, true},
      {"77K, omega = 2 pi f", 77.0, false},
      {"77K, omega = f (listed number as rad/s)", 77.0, true},
  };
  return list;
}

std::optional<double> reference_number(const DeviceConfig& cfg, const char* key) {
  if (cfg.reference.is_object() && cfg.reference.contains(key) && cfg.reference[key].is_number()) {
    return cfg.reference[key].get<double>();
  }
  return std::nullopt;
}

double mismatch(double computed, double published) {
  const double r = computed / published;
  return std::max(r, 1.0 / r);
}

int cmd_table1(const CommonOptions& c, const std::vector<std::string>& paths, std::ostream& out) {
  std::vector<DeviceConfig> devices;
  for (const auto& path : paths) devices.push_back(load_config(path));
  if (devices.empty()) {
    throw Error(ErrorKind::validation_error, "table1 needs at least one config");
  }

  json rows = json::array();
  std::vector<double> worst(table_conventions().size(), 1.0);
  bool any_reference = false;
  for (const auto& dev : devices) {
    const auto& p = dev.params;
    json row;
    row["device"] = dev.name;
    row["config_digest"] = dev.digest;
    row["length"] = quantity(p.cantilever.length, "m");
    row["omega_m"] = quantity(p.cantilever.frequency, "rad/s");
    row["quality_factor"] = quantity(p.cantilever.quality_factor, "1");
    const auto ref_th = reference_number(dev, "n_th");
    const auto ref_c = reference_number(dev, "n_c_min");
    if (ref_th) row["published_n_th"] = quantity(*ref_th, "1");
    if (ref_c) row["published_n_c_min"] = quantity(*ref_c, "1");
    json per = json::array();
    for (std::size_t k = 0; k < table_conventions().size(); ++k) {
      const auto& conv = table_conventions()[k];
      const double w = conv.listed_as_angular ? p.cantilever.frequency / constants::two_pi
                                              : p.cantilever.frequency;
      const double n_th = constants::k_boltzmann * conv.temperature / (constants::hbar * w);
      const double n_c = classical_bound(conv.temperature, w, p.cantilever.quality_factor);
      json entry = {{"convention", conv.name},
                    {"n_th", quantity(n_th, "1")},
                    {"n_c_min", quantity(n_c, "1")}};
      if (ref_th && ref_c) {
        any_reference = true;
        const double f = std::max(mismatch(n_th, *ref_th), mismatch(n_c, *ref_c));
        entry["worst_factor_vs_published"] = f;
        worst[k] = std::max(worst[k], f);
      }
      per.push_back(entry);
    }
    row["conventions"] = per;
    rows.push_back(row);
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < worst.size(); ++k) {
    if (worst[k] < worst[best]) best = k;
  }
  json report;
  report["command"] = "table1";
  report["provenance"] = {{"tool", "photocool"}, {"version", std::string(tool_version)}};
  report["rows"] = rows;
  json summary = json::array();
  for (std::size_t k = 0; k < worst.size(); ++k) {
    summary.push_back({{"convention", table_conventions()[k].name},
                       {"worst_factor_vs_published", any_reference ? json(worst[k]) : json(nullptr)}});
  }
  report["convention_summary"] = summary;
  report["convention_used"] = table_conventions()[best].name;
  report["worst_factor_vs_published"] = any_reference ? json(worst[best]) : json(nullptr);

  emit(c, report, out, [&](std::ostream& o) {
    o << "convention used: " << table_conventions()[best].name << "\n\n";
    TextTable t({"device", "L_m [m]", "omega_m [rad/s]", "Q_m", "n_th", "n_C_min", "published n_th",
                 "published n_C_min"});
    for (const auto& row : rows) {
      const auto& e = row["conventions"][best];
      auto ref = [&](const char* key) {
        return row.contains(key) ? fmt(row[key]["value"].get<double>()) : std::string("-");
      };
      t.add({row["device"].get<std::string>(), fmt(row["length"]["value"].get<double>()),
             fmt(row["omega_m"]["value"].get<double>()),
             fmt(row["quality_factor"]["value"].get<double>()),
             fmt(e["n_th"]["value"].get<double>()), fmt(e["n_c_min"]["value"].get<double>()),
             ref("published_n_th"), ref("published_n_c_min")});
    }
    t.print(o);
    if (any_reference) {
      o << "\nworst factor vs published values, per convention:\n";
      for (std::size_t k = 0; k < worst.size(); ++k) {
        o << "  " << fmt(worst[k]) << "  " << table_conventions()[k].name << '\n';
      }
    }
  });
  return 0;
}

// --------------------------------------------------------------- simulate

struct SimulateOptions {
  std::optional<double> dt;
  std::optional<double> t_total;
  std::optional<double> t_burn_in;
  std::optional<std::string> seed;
  std::size_t ensemble = 1;
  bool nonlinear = false;
  unsigned jobs = 1;
  std::size_t segments = 8;
  std::string trajectory;
  std::string trajectory_csv;
  std::string spectrum;
  bool no_thermal = false;
  bool no_shot = false;
  bool no_rp = false;
};

std::string member_path(const std::string& path, std::size_t member, std::size_t ensemble) {
  if (ensemble <= 1) return path;
  const std::filesystem::path p(path);
  auto name = p.stem().string() + ".m" + std::to_string(member) + p.extension().string();
  return (p.parent_path() / name).string();
}

json sim_config_json(const SimConfig& cfg) {
  return {
      {"dt", quantity(cfg.dt, "s")},
      {"t_total", quantity(cfg.t_total, "s")},
      {"t_burn_in", quantity(cfg.t_burn_in, "s")},
      {"seed", cfg.seed},
      {"ensemble", cfg.ensemble},
      {"record_stride", cfg.record_stride},
      {"nonlinear_cavity", cfg.nonlinear_cavity},
      {"noise",
       {{"thermal", cfg.noise.thermal},
        {"shot", cfg.noise.shot},
        {"radiation_pressure", cfg.noise.radiation_pressure}}},
  };
}

int cmd_simulate(const CommonOptions& c, const SimulateOptions& s, std::ostream& out) {
  const DeviceConfig dev = load_config(c.config);
  const SystemParams& p = dev.params;
  const std::uint64_t seed = resolve_seed(s.seed);

  SimConfig cfg = default_sim_config(p, seed);
  if (s.dt) {
    cfg.dt = *s.dt;
    const double period = constants::two_pi / p.cantilever.frequency;
    cfg.record_stride = std::max<std::size_t>(1, static_cast<std::size_t>(period / 16.0 / cfg.dt));
  }
  if (s.t_burn_in) cfg.t_burn_in = *s.t_burn_in;
  if (s.t_total) cfg.t_total = *s.t_total;
  cfg.ensemble = s.ensemble;
  cfg.nonlinear_cavity = s.nonlinear;
  cfg.noise.thermal = !s.no_thermal;
  cfg.noise.shot = !s.no_shot;
  cfg.noise.radiation_pressure = !s.no_rp;
  validate(p, cfg);

  const double period = timescales(p).period;
  std::vector<Spectrum> spectra(cfg.ensemble);
  std::vector<std::string> spectrum_errors(cfg.ensemble);
  auto on_member = [&](std::size_t member, const Trajectory& traj) {
    if (!s.trajectory.empty()) {
      const auto path = member_path(s.trajectory, member, cfg.ensemble);
      write_trajectory_binary(std::filesystem::path(path), traj);
      auto side = open_output(path + ".json");
      json echo = {{"sim_config", sim_config_json(cfg)},
                   {"member", member},
                   {"sample_interval", quantity(traj.sample_interval, "s")},
                   {"samples", traj.x.size()},
                   {"digest", hex64(trajectory_digest(traj))},
                   {"params", to_json(p)},
                   {"provenance", provenance(dev, seed)}};
      side << echo.dump(2) << '\n';
    }
    if (!s.trajectory_csv.empty()) {
      auto f = open_output(member_path(s.trajectory_csv, member, cfg.ensemble));
      write_trajectory_csv(f, traj);
    }
    if (!s.spectrum.empty() && traj.status == RunStatus::ok) {
      try {
        spectra[member] = welch_psd(traj, s.segments, period);
      } catch (const Error& e) {
        spectrum_errors[member] = e.what();
      }
    }
  };

  const EnsembleResult result = simulate_ensemble(p, cfg, s.jobs, c.model(), on_member);
  if (result.status == RunStatus::diverged) {
    throw Error(ErrorKind::instability_detected, result.diagnostic);
  }
  if (result.status == RunStatus::nan) throw Error(ErrorKind::nan_detected, result.diagnostic);
  for (const auto& e : spectrum_errors) {
    if (!e.empty()) throw Error(ErrorKind::too_few_segments, e);
  }

  json report;
  report["command"] = "simulate";
  report["provenance"] = provenance(dev, seed);
  report["input"] = {{"config", dev.source}, {"sim_config", sim_config_json(cfg)}};
  report["occupancy"] = {
      {"n_hat", quantity(result.occupancy.n_hat, "1")},
      {"stderr", quantity(result.occupancy.std_error, "1")},
      {"blocks", result.occupancy.blocks},
  };
  try {
    const auto d = occupation_budget(p, c.model());
    report["rate_equation_n_tot"] = quantity(d.total_population, "1");
  } catch (const Error&) {
    report["rate_equation_n_tot"] = nullptr;
  }
  json digests = json::array();
  for (auto d : result.digests) digests.push_back(hex64(d));
  report["digests"] = digests;

  if (!s.spectrum.empty()) {
    Spectrum pooled = spectra.front();
    for (std::size_t m = 1; m < spectra.size(); ++m) {
      for (std::size_t k = 0; k < pooled.total.size(); ++k) pooled.total[k] += spectra[m].total[k];
    }
    for (auto& v : pooled.total) v /= static_cast<double>(spectra.size());
    pooled.params_hash = params_hash(p);
    auto f = open_output(s.spectrum);
    write_spectrum_csv(f, pooled);
    report["spectrum"] = s.spectrum;
  }

  emit(c, report, out, [&](std::ostream& o) {
    TextTable t({"quantity", "value"});
    t.add({"seed", std::to_string(seed)});
    t.add({"ensemble", std::to_string(cfg.ensemble)});
    t.add({"dt [s]", fmt(cfg.dt)});
    t.add({"t_total [s]", fmt(cfg.t_total)});
    t.add({"n_hat", fmt(result.occupancy.n_hat)});
    t.add({"stderr", fmt(result.occupancy.std_error)});
    if (report["rate_equation_n_tot"].is_object()) {
      t.add({"rate-equation n_tot", fmt(report["rate_equation_n_tot"]["value"].get<double>())});
    }
    t.add({"digest[0]", hex64(result.digests.front())});
    t.print(o);
  });
  return 0;
}

// --------------------------------------------------------------- optimize

ParameterRange parse_range(const std::string& spec, const SystemParams& p) {
  const auto eq = spec.find('=');
  const std::string name = spec.substr(0, eq);
  ParameterRange r{parse_free_parameter(name), 0.0, 0.0};
  if (eq == std::string::npos) {
    const double v = parameter_value(p, r.parameter);
    if (!(v > 0.0)) {
      throw Error(ErrorKind::validation_error,
                  "free parameter " + name + " has no positive default; give name=lower:upper");
    }
    r.lower = v / 100.0;
    r.upper = v * 100.0;
    return r;
  }
  const std::string bounds = spec.substr(eq + 1);
  const auto colon = bounds.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::validation_error, "expected name=lower:upper, got '" + spec + "'");
  }
  try {
    r.lower = std::stod(bounds.substr(0, colon));
    r.upper = std::stod(bounds.substr(colon + 1));
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::validation_error, "bad bounds in '" + spec + "'");
  }
  if (!(r.lower > 0.0) || !(r.upper > r.lower) || !std::isfinite(r.upper)) {
    throw Error(ErrorKind::validation_error, "bounds must satisfy 0 < lower < upper in '" + spec + "'");
  }
  return r;
}

int cmd_optimize(const CommonOptions& c, const std::vector<std::string>& free,
                 const std::string& objective, unsigned jobs, std::ostream& out) {
  const DeviceConfig dev = load_config(c.config);
  const SystemParams& p = dev.params;
  if (free.empty()) throw Error(ErrorKind::validation_error, "give at least one --free parameter");

  JointOptions opts;
  opts.model = c.model();
  opts.jobs = jobs;
  for (const auto& f : free) opts.free.push_back(parse_range(f, p));
  const bool only_chi =
      opts.free.size() == 1 && opts.free[0].parameter == FreeParameter::deformation_coefficient;
  if (objective == "total") {
    opts.objective = Objective::total;
  } else if (objective == "noise") {
    opts.objective = Objective::noise;
  } else if (objective == "auto") {
    opts.objective = only_chi ? Objective::noise : Objective::total;
  } else {
    throw Error(ErrorKind::validation_error, "objective must be total, noise or auto");
  }

  const JointResult r = joint_optimize(p, opts);
  const OptInputs inp = opt_inputs(r.params);

  json report;
  report["command"] = "optimize";
  report["provenance"] = provenance(dev);
  json ranges = json::array();
  for (const auto& f : opts.free) {
    ranges.push_back({{"parameter", std::string(to_string(f.parameter))},
                      {"lower", f.lower},
                      {"upper", f.upper}});
  }
  report["input"] = {{"config", dev.source},
                     {"free", ranges},
                     {"objective", opts.objective == Objective::total ? "total" : "noise"}};
  const std::map<FreeParameter, std::string> units = {
      {FreeParameter::thermal_delay, "s"},
      {FreeParameter::deformation_coefficient, "s/m"},
      {FreeParameter::detuning, "rad/s"},
      {FreeParameter::power, "W"}};
  json values;
  for (std::size_t i = 0; i < opts.free.size(); ++i) {
    values[std::string(to_string(opts.free[i].parameter))] =
        quantity(r.values[i], units.at(opts.free[i].parameter));
  }
  report["optimum"] = values;
  report["objective"] = quantity(r.objective, "1");
  report["derived"] = to_json(r.budget);
  report["delay_phase"] = quantity(r.params.delay_phase(), "1");
  report["coupling_A"] = quantity(coupling_parameter(r.params), "1");
  report["coupling_A_opt"] = quantity(optimal_A(inp), "1");
  report["bounds"] = {
      {"classical", quantity(r.classical_bound, "1")},
      {"noise", quantity(r.noise_bound, "1")},
      {"classical_ratio", quantity(r.classical_ratio, "1")},
      {"noise_ratio", quantity(r.noise_ratio, "1")},
      {"classical_active", r.classical_active},
      {"noise_active", r.noise_active},
  };
  report["evaluations"] = r.evaluations;
  report["feasible_starts"] = r.feasible_starts;
  report["params"] = to_json(r.params);

  emit(c, report, out, [&](std::ostream& o) {
    TextTable t({"quantity", "value", "unit"});
    for (const auto& [key, q] : values.items()) {
      t.add({key, fmt(q["value"].get<double>()), q["unit"].get<std::string>()});
    }
    t.add({"objective", fmt(r.objective), "1"});
    t.add({"omega_m tau", fmt(r.params.delay_phase()), "1"});
    t.add({"n_C", fmt(r.budget.classical_population), "1"});
    t.add({"n_N", fmt(r.budget.noise_population), "1"});
    t.add({"n_tot", fmt(r.budget.total_population), "1"});
    t.add({"A / A_opt", fmt(coupling_parameter(r.params) / optimal_A(inp)), "1"});
    t.add({"n_C / classical bound", fmt(r.classical_ratio), r.classical_active ? "active" : ""});
    t.add({"n_N / noise bound", fmt(r.noise_ratio), r.noise_active ? "active" : ""});
    t.print(o);
  });
  return 0;
}

// -------------------------------------------------------------------- fit

int cmd_fit(const CommonOptions& c, const std::string& data_path, const std::string& free,
            std::optional<double> initial_chi, std::ostream& out) {
  const DeviceConfig dev = load_config(c.config);
  Dataset data;
  data.device = dev.params;
  data.rows = load_dataset(data_path);

  FitOptions opts;
  opts.model = c.model();
  if (initial_chi) opts.initial_chi = *initial_chi;
  if (free == "chi") {
    opts.free = FitFree::chi;
  } else if (free == "chi,epsilon") {
    opts.free = FitFree::chi_epsilon;
  } else if (free == "chi,epsilon,loss") {
    opts.free = FitFree::chi_epsilon_loss;
  } else {
    throw Error(ErrorKind::validation_error, "--free must be chi, chi,epsilon or chi,epsilon,loss");
  }

  std::ifstream raw(data_path, std::ios::binary);
  std::stringstream bytes;
  bytes << raw.rdbuf();

  const FitResult r = fit(data, opts);
  json report;
  report["command"] = "fit";
  report["provenance"] = provenance(dev);
  report["input"] = {{"config", dev.source}, {"dataset", data_path},
                     {"dataset_digest", fnv1a_hex(bytes.str())}, {"free", free}};
  report["chi"] = quantity(r.chi, "s/m");
  report["epsilon"] = quantity(r.epsilon, "1");
  report["loss_ratio"] = quantity(r.loss_ratio, "1");
  report["parameters"] = r.names;
  report["covariance"] = r.covariance;
  report["correlation"] = r.correlation;
  report["weakly_identifiable"] = r.weakly_identifiable;
  json residuals = json::array();
  for (double v : r.residuals) residuals.push_back(quantity(v, "K"));
  report["residuals"] = residuals;
  report["noise_population_at_max_power"] = quantity(r.noise_population, "1");
  report["chi2_per_dof"] = quantity(r.chi2_per_dof, "1");
  report["iterations"] = r.iterations;

  emit(c, report, out, [&](std::ostream& o) {
    TextTable t({"quantity", "value", "unit"});
    t.add({"chi", fmt(r.chi), "s/m"});
    t.add({"chi stderr", fmt(std::sqrt(r.covariance[0][0])), "s/m"});
    t.add({"epsilon", fmt(r.epsilon), "1"});
    t.add({"Gamma_c/alpha", fmt(r.loss_ratio), "1"});
    t.add({"n_N at max power", fmt(r.noise_population), "1"});
    t.add({"chi2/dof", fmt(r.chi2_per_dof), "1"});
    t.add({"iterations", std::to_string(r.iterations), ""});
    t.print(o);
    if (r.weakly_identifiable) {
      o << "warning: parameters weakly identifiable (|correlation| > 0.95)\n";
    }
  });
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photothermal self-cooling toolkit", "photocool"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version));

  CommonOptions analyze_opts, table_opts, sim_opts, opt_opts, fit_opts;

  auto* analyze = app.add_subcommand("analyze", "closed-form occupation budget and bounds");
  add_common(analyze, analyze_opts);

  auto* table1 = app.add_subcommand("table1", "thermal and minimal classical populations");
  std::vector<std::string> table_configs;
  table1->add_option("configs", table_configs, "device configs")->check(CLI::ExistingFile);
  add_common(table1, table_opts, false);

  auto* simulate = app.add_subcommand("simulate", "stochastic time-domain simulation");
  add_common(simulate, sim_opts);
  SimulateOptions s;
  simulate->add_option("--dt", s.dt, "time step, s");
  simulate->add_option("--t-total", s.t_total, "total duration including burn-in, s");
  simulate->add_option("--t-burn-in", s.t_burn_in, "discarded transient, s");
  simulate->add_option("--seed", s.seed, "RNG seed (overrides PHOTOCOOL_SEED)");
  simulate->add_option("--ensemble", s.ensemble, "independent trajectories")->check(CLI::PositiveNumber);
  simulate->add_flag("--nonlinear", s.nonlinear, "full cavity response instead of linearized force");
  simulate->add_option("--jobs,-j", s.jobs, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--segments", s.segments, "Welch segments");
  simulate->add_option("--trajectory", s.trajectory, "binary trajectory output (PTCL1)");
  simulate->add_option("--trajectory-csv", s.trajectory_csv, "CSV trajectory output");
  simulate->add_option("--spectrum", s.spectrum, "Welch PSD CSV output");
  simulate->add_flag("--no-thermal", s.no_thermal, "disable thermal noise");
  simulate->add_flag("--no-shot", s.no_shot, "disable shot noise");
  simulate->add_flag("--no-rp", s.no_rp, "disable radiation-pressure noise");

  auto* optimize = app.add_subcommand("optimize", "minimize the phonon population");
  add_common(optimize, opt_opts);
  std::vector<std::string> free_params;
  std::string objective = "auto";
  unsigned opt_jobs = 1;
  optimize->add_option("--free", free_params, "free parameter: tau|chi|A|detuning|power[=lo:hi]")
      ->required();
  optimize->add_option("--objective", objective, "total, noise or auto");
  optimize->add_option("--jobs,-j", opt_jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* fit_cmd = app.add_subcommand("fit", "fit chi to temperature-vs-power data");
  add_common(fit_cmd, fit_opts);
  std::string data_path;
  std::string fit_free = "chi";
  std::optional<double> initial_chi;
  fit_cmd->add_option("--data,-d", data_path, "CSV power_w,temperature_k[,sigma_k]")->required();
  fit_cmd->add_option("--free", fit_free, "chi | chi,epsilon | chi,epsilon,loss");
  fit_cmd->add_option("--initial-chi", initial_chi, "starting chi, s/m");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analyze) return cmd_analyze(analyze_opts, out);
    if (*table1) {
      std::vector<std::string> paths = table_configs;
      if (!table_opts.config.empty()) paths.insert(paths.begin(), table_opts.config);
      return cmd_table1(table_opts, paths, out);
    }
    if (*simulate) return cmd_simulate(sim_opts, s, out);
    if (*optimize) return cmd_optimize(opt_opts, free_params, objective, opt_jobs, out);
    if (*fit_cmd) return cmd_fit(fit_opts, data_path, fit_free, initial_chi, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace photocool
