#include "ftteleop/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "ftteleop/closed_loop_sim.hpp"
#include "ftteleop/homogeneity_audit.hpp"
#include "ftteleop/scenario.hpp"

namespace ftteleop {

namespace {

struct Options {
  std::string config;
  std::string positional;
  std::string out_dir = ".";
  std::optional<double> tol;
  std::optional<double> dt;
  std::optional<double> delay;
  std::uint64_t seed = 1;
};

void add_options(CLI::App* sub, Options& o) {
  sub->add_option("scenario", o.positional, "Scenario config file");
  sub->add_option("--config", o.config, "Scenario config file");
  sub->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--tol", o.tol, "Settling tolerance on |q_l - q_r| (rad)");
  sub->add_option("--dt", o.dt, "Override the integration step (s)");
  sub->add_option("--seed", o.seed, "Seed for audit sphere sampling")->capture_default_str();
  sub->add_option("--delay", o.delay, "Constant one-way channel delay (s), experimental");
}

std::string fmt_time(const std::optional<double>& t) {
  return t ? fmt::format("{:.4f} s", *t) : std::string("not reached");
}

std::string fmt_vec(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index j = 0; j < v.size(); ++j) s += fmt::format("{}{:.4g}", j ? ", " : "", v[j]);
  return s + "]";
}

std::string output_path(const Options& o, const std::string& file) {
  std::filesystem::create_directories(o.out_dir);
  return (std::filesystem::path(o.out_dir) / file).string();
}

ScenarioConfig load(const Options& o) {
  const std::string path = o.config.empty() ? o.positional : o.config;
  if (path.empty()) throw CLI::RequiredError("scenario config (positional or --config)");
  if (!std::filesystem::exists(path)) {
    throw std::ios_base::failure("scenario file not found: " + path);
  }
  ScenarioConfig cfg = load_scenario(path);
  if (o.dt) set_time_step(cfg, *o.dt);
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
    cfg.scenario.tol = *o.tol;
  }
  if (o.delay) {
    if (*o.delay < 0.0) throw std::invalid_argument("--delay must be >= 0");
    cfg.scenario.delay = *o.delay;
  }
  return cfg;
}

void describe(const ScenarioConfig& cfg, std::ostream& out) {
  const Scenario& sc = cfg.scenario;
  const auto [p_u, p_f] = sc.controller.exponents();
  out << fmt::format("scenario {}: {} with r1 = {:g}, r2 = {:g} (p_U = {:.4g}, p_F = {:.4g}, "
                     "degree {:+.3g})\n",
                     cfg.name, to_string(sc.controller.variant), sc.controller.weights.r1,
                     sc.controller.weights.r2, p_u, p_f, sc.controller.weights.degree());
  out << fmt::format("integration: {} at dt = {:g} s over {:g} s, recording every {:g} s\n",
                     sc.integrator == Integrator::Euler ? "explicit Euler" : "RK4", sc.dt,
                     sc.horizon, sc.dt * sc.decimation);
  if (sc.delay > 0.0) {
    out << fmt::format("channel delay: {:g} s (experimental, outside the stability analysis)\n",
                       sc.delay);
  }
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg = load(o);
  describe(cfg, out);
  const auto start = std::chrono::steady_clock::now();
  const SimTrace tr = run(cfg.scenario);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string path = output_path(o, cfg.trace_path);
  write_trace_csv(tr, path);
  const auto& t_star = tr.settling_time;
  if (t_star) {
    out << fmt::format("t* ≈ {:.1f} s (sustained |q_l - q_r| < {:g} rad from t = {:.4f} s)\n",
                       *t_star, cfg.scenario.tol, *t_star);
  } else {
    out << fmt::format("t* not reached: |q_l - q_r| does not stay below {:g} rad\n",
                       cfg.scenario.tol);
  }
  out << fmt::format("final error: {:.3e} rad\n", tr.err_norm.back());
  out << fmt::format("energy: H(0) = {:.6g} J, H(T) = {:.6g} J\n", tr.energy.front(),
                     tr.energy.back());
  out << fmt::format("max |tau| local {} remote {} N m\n", fmt_vec(tr.max_abs_tau_l),
                     fmt_vec(tr.max_abs_tau_r));
  const PassivityLedger led = passivity_ledger(tr);
  if (led.kappa_l > 0.0 || led.kappa_r > 0.0) {
    out << fmt::format("injected energy bound: kappa_l = {:.6g} J, kappa_r = {:.6g} J\n",
                       led.kappa_l, led.kappa_r);
  }
  out << fmt::format("samples: {}, wall time {:.2f} s\n", tr.size(), wall);
  out << "trace: " << path << "\n";
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg = load(o);
  describe(cfg, out);
  Scenario asym = cfg.scenario;
  asym.controller.weights = {1.0, 1.0};
  const auto traces = run_batch({cfg.scenario, asym});
  const double tol = cfg.scenario.tol;
  const auto t_ft = traces[0].settling_time;
  const auto t_as = traces[1].settling_time;
  const auto& w = cfg.scenario.controller.weights;
  out << fmt::format("settling at tol {:g} rad:\n", tol);
  out << fmt::format("  finite-time (r1 = {:g}, r2 = {:g}): {}\n", w.r1, w.r2, fmt_time(t_ft));
  out << fmt::format("  asymptotic  (r1 = r2 = 1):       {}\n", fmt_time(t_as));
  const bool faster = t_ft && (!t_as || *t_ft < *t_as);
  out << (faster ? "finite-time configuration settles first\n"
                 : "finite-time configuration does NOT settle first\n");
  const std::string path = output_path(o, cfg.name + "_compare.csv");
  std::ofstream f(path);
  f << "configuration,r1,r2,settling_time,final_error\n";
  f << fmt::format("finite_time,{:g},{:g},{},{:.17g}\n", w.r1, w.r2,
                   t_ft ? fmt::format("{:.17g}", *t_ft) : "nan", traces[0].err_norm.back());
  f << fmt::format("asymptotic,1,1,{},{:.17g}\n",
                   t_as ? fmt::format("{:.17g}", *t_as) : "nan", traces[1].err_norm.back());
  write_trace_csv(traces[0], output_path(o, cfg.name + "_ft_trace.csv"));
  write_trace_csv(traces[1], output_path(o, cfg.name + "_asym_trace.csv"));
  out << "summary: " << path << "\n";
  return kExitOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg = load(o);
  describe(cfg, out);
  const Scenario& sc = cfg.scenario;
  const ControllerConfig& ctrl = sc.controller;
  const int n = sc.local.dof();

  // Freeze the inertia at the consensus the closed loop actually reaches.
  Scenario free_motion = sc;
  free_motion.forces = {};
  const SimTrace tr = run(free_motion);
  const Vector q_c = 0.5 * (tr.q_l.back() + tr.q_r.back());
  out << "frozen inertia at q_c = " << fmt_vec(q_c) << "\n";

  const HomogeneitySpec spec =
      make_homogeneity_spec(ctrl, n, 256, o.seed);
  const auto points = sphere_samples(static_cast<int>(spec.weights.size()),
                                     spec.sphere_samples, spec.seed);
  const Field fh = [&](const Vector& x) {
    return homogeneous_part(ctrl, sc.local, sc.remote, q_c, x);
  };
  const Field full = [&](const Vector& x) {
    return closed_loop_field(ctrl, sc.local, sc.remote, q_c, x);
  };
  const double defect = check_degree(fh, spec, points);
  const double full_defect = check_degree(full, spec, points);
  const auto rows = vanishing_sweep(ctrl, sc.local, sc.remote, q_c, spec);
  const double eps_min = spec.epsilons.back();
  const double slope = loglog_slope(rows, eps_min, 10.0 * eps_min);
  bool monotone = true;
  for (std::size_t k = rows.size() - 3; k < rows.size(); ++k) {
    monotone = monotone && rows[k].deviation <= rows[k - 1].deviation;
  }
  const double ratio = rows.back().deviation / rows.front().deviation;

  struct Check {
    std::string name;
    bool pass;
    std::string detail;
  };
  const std::vector<Check> checks{
      {"negative degree", spec.degree < 0.0, fmt::format("l = r2 - r1 = {:.4g}", spec.degree)},
      {"approximation is homogeneous", defect <= 1e-9,
       fmt::format("max relative defect {:.3e} (limit 1e-9)", defect)},
      {"full field is not homogeneous", full_defect > 1e-9,
       fmt::format("max relative defect {:.3e}", full_defect)},
      {"remainder vanishes", ratio < 1e-2,
       fmt::format("deviation({:g}) / deviation(1) = {:.3e} (limit 1e-2)", eps_min, ratio)},
      {"monotone tail", monotone, "last four epsilon grid points non-increasing"},
      {"vanishing rate", slope >= 1.0,
       fmt::format("log-log slope over the last decade {:.3f} (limit 1.0)", slope)},
  };
  const std::string path = output_path(o, cfg.audit_path);
  {
    std::ofstream f(path + ".tmp");
    write_sweep_csv(rows, f);
  }
  std::filesystem::rename(path + ".tmp", path);
  bool all = true;
  for (const auto& c : checks) {
    out << fmt::format("{} {}: {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
    all = all && c.pass;
  }
  out << "sampling can falsify but not certify uniformity over the sphere\n";
  out << "audit: " << path << "\n";
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_validate(const Options& o, std::ostream& out) {
  const ScenarioConfig cfg = load(o);
  describe(cfg, out);
  const Scenario& sc = cfg.scenario;
  out << fmt::format("gravity bounds g_k: local {} remote {} N m\n",
                     fmt_vec(sc.local.bounds().gravity), fmt_vec(sc.remote.bounds().gravity));
  const SaturationReport rep = validate_saturation(sc.controller, sc.local, sc.remote);
  if (rep.unlimited) {
    out << "no torque limits: saturation budget not applicable\n";
    out << "PASS gains and weights\n";
    return kExitOk;
  }
  if (!is_saturated(sc.controller.variant)) {
    out << "torque limits are set but " << to_string(sc.controller.variant)
        << " is unsaturated: torques are not bounded a priori\n";
    out << "WARN torque limits cannot be guaranteed; use C3 or C4\n";
    return kExitOk;
  }
  for (const auto& j : rep.joints) {
    out << fmt::format(
        "{} {} joint {}: budget literal {:.4g}, capped {:.4g}, available {:.4g}, margin "
        "{:+.4g}\n",
        j.pass ? "PASS" : "FAIL", j.side == Side::Local ? "local" : "remote", j.joint + 1,
        j.literal_budget, j.cap_budget, j.available, j.margin());
  }
  return rep.pass() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-time bilateral teleoperation simulator"};
  app.require_subcommand(1);
  Options opts;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a scenario and write its trace");
  CLI::App* compare =
      app.add_subcommand("compare", "Compare the finite-time and r1 = r2 configurations");
  CLI::App* audit = app.add_subcommand("audit", "Homogeneity audit of the closed loop");
  CLI::App* validate = app.add_subcommand("validate", "Check gains and saturation budget");
  for (CLI::App* sub : {simulate, compare, audit, validate}) add_options(sub, opts);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opts, out);
    if (compare->parsed()) return cmd_compare(opts, out);
    if (audit->parsed()) return cmd_audit(opts, out);
    return cmd_validate(opts, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingFile;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const InstabilityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInstability;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace ftteleop
