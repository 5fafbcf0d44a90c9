#include "ftteleop/closed_loop_sim.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>

namespace ftteleop {

namespace {

struct Derivative {
  Vector dq_l, ddq_l, dq_r, ddq_r, dth_l, dth_r;
  Vector tau_l, tau_r, f_l, f_r;
};

struct Model {
  const ControllerConfig& config;
  const RobotParams& params_l;
  const RobotParams& params_r;
  const ForceProfiles& forces;
};

// rx_l is the local position as seen by the remote controller and vice versa.
Derivative evaluate(const Model& m, const TeleopState& s, const Vector& rx_l,
                    const Vector& rx_r) {
  Derivative d;
  d.tau_l = robot_torque(m.config, Side::Local, m.params_l, s.local, rx_r, s.ctrl.theta_l);
  d.tau_r = robot_torque(m.config, Side::Remote, m.params_r, s.remote, rx_l, s.ctrl.theta_r);
  d.f_l = m.forces.local.evaluate(s.time, s.local);
  d.f_r = m.forces.remote.evaluate(s.time, s.remote);
  d.dq_l = s.local.qdot;
  d.dq_r = s.remote.qdot;
  d.ddq_l = forward_dynamics(m.params_l, s.local, d.tau_l, d.f_l);
  d.ddq_r = forward_dynamics(m.params_r, s.remote, d.tau_r, d.f_r);
  d.dth_l = theta_rate(m.config, Side::Local, s.local.q, s.ctrl.theta_l);
  d.dth_r = theta_rate(m.config, Side::Remote, s.remote.q, s.ctrl.theta_r);
  return d;
}

TeleopState advance(const TeleopState& s, const Derivative& d, double h) {
  TeleopState out = s;
  out.local.q += h * d.dq_l;
  out.local.qdot += h * d.ddq_l;
  out.remote.q += h * d.dq_r;
  out.remote.qdot += h * d.ddq_r;
  if (d.dth_l.size() > 0) {
    out.ctrl.theta_l += h * d.dth_l;
    out.ctrl.theta_r += h * d.dth_r;
  }
  out.time = s.time + h;
  return out;
}

Derivative combine_rk4(const Derivative& k1, const Derivative& k2, const Derivative& k3,
                       const Derivative& k4) {
  auto mix = [](const Vector& a, const Vector& b, const Vector& c, const Vector& e) -> Vector {
    if (a.size() == 0) return a;
    return (a + 2.0 * b + 2.0 * c + e) / 6.0;
  };
  Derivative d = k1;
  d.dq_l = mix(k1.dq_l, k2.dq_l, k3.dq_l, k4.dq_l);
  d.ddq_l = mix(k1.ddq_l, k2.ddq_l, k3.ddq_l, k4.ddq_l);
  d.dq_r = mix(k1.dq_r, k2.dq_r, k3.dq_r, k4.dq_r);
  d.ddq_r = mix(k1.ddq_r, k2.ddq_r, k3.ddq_r, k4.ddq_r);
  d.dth_l = mix(k1.dth_l, k2.dth_l, k3.dth_l, k4.dth_l);
  d.dth_r = mix(k1.dth_r, k2.dth_r, k3.dth_r, k4.dth_r);
  return d;
}

bool finite(const TeleopState& s) {
  return s.local.q.allFinite() && s.local.qdot.allFinite() && s.remote.q.allFinite() &&
         s.remote.qdot.allFinite() && s.ctrl.theta_l.allFinite() && s.ctrl.theta_r.allFinite();
}

// Advances one step. `delayed` holds the positions exchanged over the channel, or
// nothing when the robots see each other instantly. `first` is the derivative at s,
// reused from the caller.
TeleopState integrate(const Model& m, const TeleopState& s, const Derivative& first, double dt,
                      Integrator integrator,
                      const std::optional<std::pair<Vector, Vector>>& delayed) {
  if (integrator == Integrator::Euler) return advance(s, first, dt);
  auto eval = [&](const TeleopState& x) {
    return delayed ? evaluate(m, x, delayed->first, delayed->second)
                   : evaluate(m, x, x.local.q, x.remote.q);
  };
  const Derivative k2 = eval(advance(s, first, 0.5 * dt));
  const Derivative k3 = eval(advance(s, k2, 0.5 * dt));
  const Derivative k4 = eval(advance(s, k3, dt));
  TeleopState out = advance(s, combine_rk4(first, k2, k3, k4), dt);
  out.time = s.time + dt;
  return out;
}

void check_finite(const TeleopState& s) {
  if (!finite(s)) {
    throw InstabilityError(
        fmt::format("closed loop became non-finite at t = {:.6g} s (step too large or "
                    "gains too aggressive)",
                    s.time),
        s.time);
  }
}

void check_dims(const Scenario& sc) {
  const int n = sc.local.dof();
  if (sc.remote.dof() != n) throw std::invalid_argument("local and remote joint counts differ");
  const TeleopState& x = sc.initial;
  if (x.local.q.size() != n || x.local.qdot.size() != n || x.remote.q.size() != n ||
      x.remote.qdot.size() != n) {
    throw std::invalid_argument("initial state dimensions do not match the robots");
  }
  if (has_virtual_state(sc.controller.variant) &&
      (x.ctrl.theta_l.size() != n || x.ctrl.theta_r.size() != n)) {
    throw std::invalid_argument("initial virtual state dimensions do not match the robots");
  }
  if (!(sc.dt > 0.0) || !(sc.horizon > 0.0) || sc.decimation < 1) {
    throw std::invalid_argument("dt and horizon must be positive, decimation >= 1");
  }
  if (sc.delay < 0.0) throw std::invalid_argument("delay must be >= 0");
}

void record(SimTrace& tr, const Model& m, const TeleopState& s, const Derivative& d) {
  tr.t.push_back(s.time);
  tr.q_l.push_back(s.local.q);
  tr.q_r.push_back(s.remote.q);
  tr.qd_l.push_back(s.local.qdot);
  tr.qd_r.push_back(s.remote.qdot);
  if (tr.has_theta) {
    tr.th_l.push_back(s.ctrl.theta_l);
    tr.th_r.push_back(s.ctrl.theta_r);
  }
  tr.tau_l.push_back(d.tau_l);
  tr.tau_r.push_back(d.tau_r);
  tr.f_l.push_back(d.f_l);
  tr.f_r.push_back(d.f_r);
  tr.err_norm.push_back((s.local.q - s.remote.q).norm());
  tr.energy.push_back(desired_potential(m.config, s.local.q, s.remote.q, s.ctrl) +
                      energies(m.params_l, s.local).kinetic +
                      energies(m.params_r, s.remote).kinetic);
}

}  // namespace

std::string to_string(ForceKind k) {
  switch (k) {
    case ForceKind::Zero: return "zero";
    case ForceKind::Pulse: return "pulse";
    case ForceKind::SpringDamper: return "spring_damper";
  }
  return "?";
}

Vector ForceProfile::evaluate(double t, const RobotState& s) const {
  const bool active = t >= start && t < stop;
  if (kind == ForceKind::Zero || !active) return Vector::Zero(s.q.size());
  if (kind == ForceKind::Pulse) return amplitude;
  return -stiffness.cwiseProduct(s.q - anchor) - damping.cwiseProduct(s.qdot);
}

void ForceProfile::validate(int dof) const {
  if (!(stop >= start)) throw std::invalid_argument("force profile stop precedes start");
  if (kind == ForceKind::Pulse) {
    if (amplitude.size() != dof) throw std::invalid_argument("pulse amplitude size mismatch");
    if (!amplitude.allFinite()) throw std::invalid_argument("pulse amplitude must be finite");
  }
  if (kind == ForceKind::SpringDamper) {
    if (stiffness.size() != dof || damping.size() != dof || anchor.size() != dof) {
      throw std::invalid_argument("spring_damper stiffness/damping/anchor size mismatch");
    }
    if ((stiffness.array() < 0.0).any() || (damping.array() < 0.0).any()) {
      throw std::invalid_argument(
          "spring_damper coefficients must be nonnegative (environment must be passive)");
    }
  }
}

TeleopState step(const TeleopState& state, const ControllerConfig& config,
                 const RobotParams& params_l, const RobotParams& params_r,
                 const ForceProfiles& forces, double dt, Integrator integrator) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const Model m{config, params_l, params_r, forces};
  const Derivative d = evaluate(m, state, state.local.q, state.remote.q);
  TeleopState next = integrate(m, state, d, dt, integrator, std::nullopt);
  check_finite(next);
  return next;
}

SimTrace run(const Scenario& sc) {
  check_dims(sc);
  const int n = sc.local.dof();
  validate_config(sc.controller, n);
  sc.forces.local.validate(n);
  sc.forces.remote.validate(n);

  const Model m{sc.controller, sc.local, sc.remote, sc.forces};
  SimTrace tr;
  tr.dof = n;
  tr.has_theta = has_virtual_state(sc.controller.variant);
  tr.max_abs_tau_l = Vector::Zero(n);
  tr.max_abs_tau_r = Vector::Zero(n);

  const auto steps = static_cast<long>(std::llround(sc.horizon / sc.dt));
  const auto delay_steps = static_cast<long>(std::llround(sc.delay / sc.dt));
  std::deque<std::pair<Vector, Vector>> history;  // (q_l, q_r) for the last delay_steps steps

  TeleopState s = sc.initial;
  s.time = 0.0;
  for (long k = 0;; ++k) {
    std::optional<std::pair<Vector, Vector>> delayed;
    if (delay_steps > 0) {
      history.emplace_back(s.local.q, s.remote.q);
      if (static_cast<long>(history.size()) > delay_steps + 1) history.pop_front();
      delayed = history.front();
    }
    const Derivative d = delayed ? evaluate(m, s, delayed->first, delayed->second)
                                 : evaluate(m, s, s.local.q, s.remote.q);
    tr.max_abs_tau_l = tr.max_abs_tau_l.cwiseMax(d.tau_l.cwiseAbs());
    tr.max_abs_tau_r = tr.max_abs_tau_r.cwiseMax(d.tau_r.cwiseAbs());
    if (k % sc.decimation == 0 || k == steps) record(tr, m, s, d);
    if (k == steps) break;
    TeleopState next = integrate(m, s, d, sc.dt, sc.integrator, delayed);
    next.time = static_cast<double>(k + 1) * sc.dt;
    check_finite(next);
    s = std::move(next);
  }
  tr.settling_time = convergence_time(tr, sc.tol);
  return tr;
}

std::vector<SimTrace> run_batch(const std::vector<Scenario>& scenarios) {
  std::vector<std::future<SimTrace>> jobs;
  jobs.reserve(scenarios.size());
  for (const auto& sc : scenarios) {
    jobs.push_back(std::async(std::launch::async, [&sc] { return run(sc); }));
  }
  std::vector<SimTrace> out;
  out.reserve(jobs.size());
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

std::optional<double> convergence_time(const SimTrace& trace, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (trace.size() == 0) throw std::invalid_argument("empty trace");
  std::size_t first_ok = 0;
  for (std::size_t k = trace.size(); k-- > 0;) {
    if (!(trace.err_norm[k] < tol)) {
      first_ok = k + 1;
      break;
    }
  }
  if (first_ok == trace.size()) return std::nullopt;
  return trace.t[first_ok];
}

EnergyAudit energy_audit(const SimTrace& trace, const ControllerConfig& config,
                         const RobotParams& params_l, const RobotParams& params_r,
                         double increase_tolerance) {
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (trace.f_l[k].cwiseAbs().maxCoeff() != 0.0 || trace.f_r[k].cwiseAbs().maxCoeff() != 0.0) {
      throw std::invalid_argument(
          "energy audit needs a free-motion trace; external forces were recorded at t = " +
          std::to_string(trace.t[k]));
    }
  }
  EnergyAudit audit;
  const std::size_t count = trace.size();
  audit.samples.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    ControllerState ctrl;
    if (trace.has_theta) ctrl = {trace.th_l[k], trace.th_r[k]};
    const RobotState sl{trace.q_l[k], trace.qd_l[k]};
    const RobotState sr{trace.q_r[k], trace.qd_r[k]};
    EnergySample& e = audit.samples[k];
    e.t = trace.t[k];
    e.energy = desired_potential(config, sl.q, sr.q, ctrl) + energies(params_l, sl).kinetic +
               energies(params_r, sr).kinetic;
    e.rate_analytic = dissipation_rate(config, sl, sr, ctrl);
    if (e.rate_analytic > 0.0) ++audit.positive_rate_samples;
  }
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == count ? k : k + 1;
    if (hi > lo) {
      audit.samples[k].rate_numeric = (audit.samples[hi].energy - audit.samples[lo].energy) /
                                      (audit.samples[hi].t - audit.samples[lo].t);
    }
    if (k + 1 < count) {
      const double rise = audit.samples[k + 1].energy - audit.samples[k].energy;
      audit.max_increase = std::max(audit.max_increase, rise);
      if (rise > increase_tolerance) audit.flagged.push_back(k + 1);
    }
  }
  return audit;
}

PassivityLedger passivity_ledger(const SimTrace& trace) {
  PassivityLedger led;
  const std::size_t count = trace.size();
  led.work_l.assign(count, 0.0);
  led.work_r.assign(count, 0.0);
  for (std::size_t k = 1; k < count; ++k) {
    const double h = trace.t[k] - trace.t[k - 1];
    const double pl0 = trace.qd_l[k - 1].dot(trace.f_l[k - 1]);
    const double pl1 = trace.qd_l[k].dot(trace.f_l[k]);
    const double pr0 = trace.qd_r[k - 1].dot(trace.f_r[k - 1]);
    const double pr1 = trace.qd_r[k].dot(trace.f_r[k]);
    led.work_l[k] = led.work_l[k - 1] + 0.5 * h * (pl0 + pl1);
    led.work_r[k] = led.work_r[k - 1] + 0.5 * h * (pr0 + pr1);
  }
  for (std::size_t k = 0; k < count; ++k) {
    led.kappa_l = std::max(led.kappa_l, led.work_l[k]);
    led.kappa_r = std::max(led.kappa_r, led.work_r[k]);
  }
  led.ledger_l.resize(count);
  led.ledger_r.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    led.ledger_l[k] = led.kappa_l - led.work_l[k];
    led.ledger_r[k] = led.kappa_r - led.work_r[k];
  }
  return led;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> csv_header(int n, bool has_theta) {
  std::vector<std::string> h{"t"};
  auto block = [&](const char* prefix) {
    for (int j = 1; j <= n; ++j) h.push_back(fmt::format("{}{}", prefix, j));
  };
  block("ql");
  block("qr");
  block("dql");
  block("dqr");
  if (has_theta) {
    block("thl");
    block("thr");
  }
  block("taul");
  block("taur");
  block("fl");
  block("fr");
  h.emplace_back("err_norm");
  h.emplace_back("H");
  return h;
}

}  // namespace

void write_trace_csv(const SimTrace& trace, std::ostream& out) {
  const auto header = csv_header(trace.dof, trace.has_theta);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  std::string line;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    line = fmt::format("{:.17g}", trace.t[k]);
    auto put = [&](const Vector& v) {
      for (Eigen::Index j = 0; j < v.size(); ++j) line += fmt::format(",{:.17g}", v[j]);
    };
    put(trace.q_l[k]);
    put(trace.q_r[k]);
    put(trace.qd_l[k]);
    put(trace.qd_r[k]);
    if (trace.has_theta) {
      put(trace.th_l[k]);
      put(trace.th_r[k]);
    }
    put(trace.tau_l[k]);
    put(trace.tau_r[k]);
    put(trace.f_l[k]);
    put(trace.f_r[k]);
    line += fmt::format(",{:.17g},{:.17g}\n", trace.err_norm[k], trace.energy[k]);
    out << line;
  }
}

void write_trace_csv(const SimTrace& trace, const std::string& path) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    write_trace_csv(trace, f);
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

SimTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace CSV is empty");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  SimTrace tr;
  for (const auto& c : cols) {
    if (c.rfind("ql", 0) == 0) ++tr.dof;
    if (c.rfind("thl", 0) == 0) tr.has_theta = true;
  }
  if (cols != csv_header(tr.dof, tr.has_theta)) {
    throw std::invalid_argument("trace CSV header does not match the expected column layout");
  }
  const int n = tr.dof;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    v.reserve(cols.size());
    const char* p = line.c_str();
    while (*p) {
      char* end = nullptr;
      v.push_back(std::strtod(p, &end));
      if (end == p) throw std::invalid_argument(fmt::format("bad number on line {}", lineno));
      p = end;
      if (*p == ',') ++p;
    }
    if (v.size() != cols.size()) {
      throw std::invalid_argument(fmt::format("line {} has {} fields, expected {}", lineno,
                                              v.size(), cols.size()));
    }
    std::size_t at = 0;
    auto take = [&]() {
      Vector out = Eigen::Map<const Vector>(v.data() + at, n);
      at += static_cast<std::size_t>(n);
      return out;
    };
    tr.t.push_back(v[at++]);
    tr.q_l.push_back(take());
    tr.q_r.push_back(take());
    tr.qd_l.push_back(take());
    tr.qd_r.push_back(take());
    if (tr.has_theta) {
      tr.th_l.push_back(take());
      tr.th_r.push_back(take());
    }
    tr.tau_l.push_back(take());
    tr.tau_r.push_back(take());
    tr.f_l.push_back(take());
    tr.f_r.push_back(take());
    tr.err_norm.push_back(v[at++]);
    tr.energy.push_back(v[at++]);
  }
  return tr;
}

}  // namespace ftteleop
