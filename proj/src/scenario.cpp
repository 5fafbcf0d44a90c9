#include "ftteleop/scenario.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace ftteleop {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

using Section = std::map<std::string, Entry>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& errors) {
  std::string msg = "invalid scenario:";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"local", {"mass", "length", "com", "inertia", "gravity", "torque_limit"}},
      {"remote", {"mass", "length", "com", "inertia", "gravity", "torque_limit"}},
      {"controller",
       {"variant", "r1", "r2", "ks", "ds", "ds_local", "ds_remote", "kc", "kc_local",
        "kc_remote", "dc", "dc_local", "dc_remote", "delta_u", "delta_f"}},
      {"initial",
       {"q_local", "q_remote", "qdot_local", "qdot_remote", "theta_local", "theta_remote"}},
      {"force.local", {"kind", "start", "stop", "amplitude", "stiffness", "damping", "anchor"}},
      {"force.remote", {"kind", "start", "stop", "amplitude", "stiffness", "damping", "anchor"}},
      {"sim", {"horizon", "dt", "sample_interval", "integrator", "delay", "tol"}},
      {"output", {"trace", "audit"}},
  };
  return keys;
}

// Collects typed lookups and every error encountered along the way.
class Reader {
 public:
  Reader(std::map<std::string, Section>& sections, std::vector<std::string>& errors)
      : sections_(sections), errors_(errors) {}

  Entry* find(const std::string& sec, const std::string& key) {
    auto s = sections_.find(sec);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    k->second.used = true;
    return &k->second;
  }

  bool has(const std::string& sec, const std::string& key) { return find(sec, key) != nullptr; }

  void error(const Entry* e, const std::string& sec, const std::string& key,
             const std::string& what) {
    if (e) {
      errors_.push_back(fmt::format("line {}: [{}] {}: {}", e->line, sec, key, what));
    } else {
      errors_.push_back(fmt::format("[{}] {}: {}", sec, key, what));
    }
  }

  std::optional<std::vector<double>> numbers(const std::string& sec, const std::string& key) {
    Entry* e = find(sec, key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      char* end = nullptr;
      const double v = std::strtod(item.c_str(), &end);
      if (item.empty() || *end != '\0' || !std::isfinite(v)) {
        error(e, sec, key, "'" + item + "' is not a finite number");
        return std::nullopt;
      }
      out.push_back(v);
    }
    return out;
  }

  std::optional<double> scalar(const std::string& sec, const std::string& key,
                               std::optional<double> fallback = std::nullopt) {
    if (!has(sec, key)) {
      if (!fallback) error(nullptr, sec, key, "missing required key");
      return fallback;
    }
    auto v = numbers(sec, key);
    if (!v) return std::nullopt;
    if (v->size() != 1) {
      error(find(sec, key), sec, key, "expected a single number");
      return std::nullopt;
    }
    return (*v)[0];
  }

  // A list of n numbers; a single value broadcasts to all joints.
  std::optional<Vector> vec(const std::string& sec, const std::string& key, int n,
                            std::optional<Vector> fallback = std::nullopt) {
    if (!has(sec, key)) {
      if (!fallback) error(nullptr, sec, key, "missing required key");
      return fallback;
    }
    auto v = numbers(sec, key);
    if (!v) return std::nullopt;
    if (n > 0 && v->size() == 1) return Vector::Constant(n, (*v)[0]);
    if (n > 0 && static_cast<int>(v->size()) != n) {
      error(find(sec, key), sec, key,
            fmt::format("expected {} values (one per joint), got {}", n, v->size()));
      return std::nullopt;
    }
    return Eigen::Map<const Vector>(v->data(), static_cast<Eigen::Index>(v->size()));
  }

  std::optional<std::string> word(const std::string& sec, const std::string& key,
                                  std::optional<std::string> fallback = std::nullopt) {
    Entry* e = find(sec, key);
    if (!e) {
      if (!fallback) error(nullptr, sec, key, "missing required key");
      return fallback;
    }
    return e->value;
  }

 private:
  std::map<std::string, Section>& sections_;
  std::vector<std::string>& errors_;
};

std::optional<RobotParams> read_robot(Reader& r, const std::string& sec,
                                      std::vector<std::string>& errors) {
  auto mass = r.vec(sec, "mass", 0);
  const int n = mass ? static_cast<int>(mass->size()) : 0;
  auto length = r.vec(sec, "length", n);
  auto com = r.vec(sec, "com", n);
  auto inertia = r.vec(sec, "inertia", n, Vector::Zero(std::max(n, 1)));
  auto gravity = r.scalar(sec, "gravity", 9.81);
  std::optional<Vector> limits;
  bool limits_ok = true;
  if (auto w = r.word(sec, "torque_limit", "unlimited"); w && trim(*w) != "unlimited") {
    auto v = r.vec(sec, "torque_limit", n);
    limits_ok = v.has_value();
    limits = v;
  }
  if (!mass || !length || !com || !inertia || !gravity || !limits_ok) return std::nullopt;
  try {
    return RobotParams(*mass, *length, *com, *inertia, *gravity, limits);
  } catch (const std::invalid_argument& e) {
    errors.push_back(fmt::format("[{}] {}", sec, e.what()));
    return std::nullopt;
  }
}

std::optional<ForceProfile> read_force(Reader& r, const std::string& sec, int n) {
  ForceProfile f;
  const auto kind = r.word(sec, "kind", "zero");
  if (!kind) return std::nullopt;
  if (*kind == "zero") {
    f.kind = ForceKind::Zero;
  } else if (*kind == "pulse") {
    f.kind = ForceKind::Pulse;
  } else if (*kind == "spring_damper") {
    f.kind = ForceKind::SpringDamper;
  } else {
    r.error(r.find(sec, "kind"), sec, "kind",
            "unknown force kind '" + *kind + "' (zero, pulse, spring_damper)");
    return std::nullopt;
  }
  const auto start = r.scalar(sec, "start", 0.0);
  const auto stop = r.scalar(sec, "stop", std::numeric_limits<double>::infinity());
  if (!start || !stop) return std::nullopt;
  f.start = *start;
  f.stop = *stop;
  const Vector zero = Vector::Zero(n);
  if (f.kind == ForceKind::Pulse) {
    auto a = r.vec(sec, "amplitude", n);
    if (!a) return std::nullopt;
    f.amplitude = *a;
  }
  if (f.kind == ForceKind::SpringDamper) {
    auto k = r.vec(sec, "stiffness", n);
    auto d = r.vec(sec, "damping", n, zero);
    auto a = r.vec(sec, "anchor", n, zero);
    if (!k || !d || !a) return std::nullopt;
    f.stiffness = *k;
    f.damping = *d;
    f.anchor = *a;
  }
  try {
    f.validate(n);
  } catch (const std::invalid_argument& e) {
    r.error(nullptr, sec, "kind", e.what());
    return std::nullopt;
  }
  return f;
}

std::string fmt_vec(const Vector& v) {
  std::string s;
  for (Eigen::Index j = 0; j < v.size(); ++j) s += fmt::format("{}{:.17g}", j ? ", " : "", v[j]);
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

ScenarioConfig parse_scenario(const std::string& text, const std::string& name) {
  std::vector<std::string> errors;
  std::map<std::string, Section> sections;
  {
    std::stringstream in(text);
    std::string raw;
    std::string current;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      const auto hash = raw.find('#');
      const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          errors.push_back(fmt::format("line {}: unterminated section header", lineno));
          continue;
        }
        current = trim(line.substr(1, line.size() - 2));
        if (!known_keys().contains(current)) {
          errors.push_back(fmt::format("line {}: unknown section [{}]", lineno, current));
        }
        sections[current];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        errors.push_back(fmt::format("line {}: expected 'key = value'", lineno));
        continue;
      }
      if (current.empty()) {
        errors.push_back(fmt::format("line {}: key outside of any section", lineno));
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      auto& sec = sections[current];
      if (sec.contains(key)) {
        errors.push_back(fmt::format("line {}: duplicate key '{}' in [{}] (first on line {})",
                                     lineno, key, current, sec[key].line));
        continue;
      }
      if (const auto k = known_keys().find(current);
          k != known_keys().end() && !k->second.contains(key)) {
        errors.push_back(fmt::format("line {}: unknown key '{}' in [{}]", lineno, key, current));
      }
      sec[key] = Entry{value, lineno, false};
    }
  }

  Reader r(sections, errors);
  auto local = read_robot(r, "local", errors);
  auto remote = read_robot(r, "remote", errors);
  const int n = local ? local->dof() : (remote ? remote->dof() : 0);
  if (local && remote && local->dof() != remote->dof()) {
    errors.push_back(fmt::format("[remote] has {} joints but [local] has {}", remote->dof(),
                                 local->dof()));
  }

  ControllerConfig ctrl;
  if (auto v = r.word("controller", "variant")) {
    try {
      ctrl.variant = parse_variant(*v);
    } catch (const std::invalid_argument& e) {
      r.error(r.find("controller", "variant"), "controller", "variant", e.what());
    }
  }
  if (auto v = r.scalar("controller", "r1")) ctrl.weights.r1 = *v;
  if (auto v = r.scalar("controller", "r2")) ctrl.weights.r2 = *v;
  if (auto v = r.vec("controller", "ks", n)) ctrl.ks = *v;
  // Per-robot gains: `<gain>_local` / `<gain>_remote` override a shared `<gain>`.
  auto robot_gain = [&](const std::string& gain, bool needed) -> std::pair<Vector, Vector> {
    Vector l, rr;
    const bool shared = r.has("controller", gain);
    std::optional<Vector> base;
    if (shared) base = r.vec("controller", gain, n);
    for (const char* side : {"local", "remote"}) {
      const std::string key = gain + "_" + side;
      std::optional<Vector> v;
      if (r.has("controller", key)) {
        v = r.vec("controller", key, n);
      } else if (base) {
        v = base;
      } else if (needed && !shared) {
        r.error(nullptr, "controller", gain, fmt::format("missing (set '{}' or '{}')", gain, key));
      }
      if (v) (std::string(side) == "local" ? l : rr) = *v;
    }
    return {l, rr};
  };
  const bool virt = has_virtual_state(ctrl.variant);
  std::tie(ctrl.local.ds, ctrl.remote.ds) = robot_gain("ds", !virt);
  std::tie(ctrl.local.kc, ctrl.remote.kc) = robot_gain("kc", virt);
  std::tie(ctrl.local.dc, ctrl.remote.dc) = robot_gain("dc", virt);
  if (is_saturated(ctrl.variant)) {
    if (auto v = r.scalar("controller", "delta_u")) ctrl.delta_u = *v;
    if (auto v = r.scalar("controller", "delta_f")) ctrl.delta_f = *v;
  } else {
    (void)r.find("controller", "delta_u");
    (void)r.find("controller", "delta_f");
  }

  const std::size_t before_ctrl = errors.size();
  if (n > 0) {
    for (auto& e : check_config(ctrl, n)) errors.push_back("[controller] " + e);
  }
  const bool ctrl_ok = errors.size() == before_ctrl;

  // Robot parameters are immutable, so everything else is collected first and the
  // scenario is assembled only when no error was found.
  struct {
    TeleopState initial;
    ForceProfiles forces;
    double horizon = 8.0, dt = 1e-4, delay = 0.0, tol = 1e-3;
    int decimation = 10;
    Integrator integrator = Integrator::Euler;
  } sc;
  double sample_interval = 1e-3;

  const Vector zero = Vector::Zero(n);
  auto q_l = r.vec("initial", "q_local", n);
  auto q_r = r.vec("initial", "q_remote", n);
  auto qd_l = r.vec("initial", "qdot_local", n, zero);
  auto qd_r = r.vec("initial", "qdot_remote", n, zero);
  if (q_l && q_r && qd_l && qd_r) {
    sc.initial.local = {*q_l, *qd_l};
    sc.initial.remote = {*q_r, *qd_r};
    if (virt) {
      auto th_l = r.vec("initial", "theta_local", n, *q_l);
      auto th_r = r.vec("initial", "theta_remote", n, *q_r);
      if (th_l && th_r) sc.initial.ctrl = {*th_l, *th_r};
    } else {
      (void)r.find("initial", "theta_local");
      (void)r.find("initial", "theta_remote");
    }
  }

  if (auto f = read_force(r, "force.local", n)) sc.forces.local = *f;
  if (auto f = read_force(r, "force.remote", n)) sc.forces.remote = *f;

  if (auto v = r.scalar("sim", "horizon")) {
    if (*v > 0.0) sc.horizon = *v;
    else r.error(r.find("sim", "horizon"), "sim", "horizon", "must be positive");
  }
  if (auto v = r.scalar("sim", "dt")) {
    if (*v > 0.0) sc.dt = *v;
    else r.error(r.find("sim", "dt"), "sim", "dt", "must be positive");
  }
  if (auto v = r.scalar("sim", "sample_interval", 1e-3)) {
    if (*v >= sc.dt) sample_interval = *v;
    else r.error(r.find("sim", "sample_interval"), "sim", "sample_interval",
                 "must be at least dt");
  }
  sc.decimation = std::max(1, static_cast<int>(std::lround(sample_interval / sc.dt)));
  if (auto v = r.word("sim", "integrator", "euler")) {
    if (*v == "euler") sc.integrator = Integrator::Euler;
    else if (*v == "rk4") sc.integrator = Integrator::RK4;
    else r.error(r.find("sim", "integrator"), "sim", "integrator", "expected euler or rk4");
  }
  if (auto v = r.scalar("sim", "delay", 0.0)) {
    if (*v >= 0.0) sc.delay = *v;
    else r.error(r.find("sim", "delay"), "sim", "delay", "must be >= 0");
  }
  if (auto v = r.scalar("sim", "tol", 1e-3)) {
    if (*v > 0.0) sc.tol = *v;
    else r.error(r.find("sim", "tol"), "sim", "tol", "must be positive");
  }
  const std::string trace_path = r.word("output", "trace", name + "_trace.csv").value_or("");
  const std::string audit_path = r.word("output", "audit", name + "_audit.csv").value_or("");

  if (ctrl_ok && local && remote && is_saturated(ctrl.variant)) {
    const SaturationReport rep = validate_saturation(ctrl, *local, *remote);
    for (const auto& j : rep.joints) {
      if (j.pass) continue;
      const char* gain = ctrl.variant == Variant::C3 ? "Ds" : "Kc";
      errors.push_back(fmt::format(
          "[controller] saturation budget condition Ks*delta_u + {}*delta_f < tau_max - g_k "
          "violated on {} joint {}: budget {:.6g} (literal {:.6g}, capped {:.6g}) >= {:.6g}",
          gain, j.side == Side::Local ? "local" : "remote", j.joint + 1,
          std::max(j.literal_budget, j.cap_budget), j.literal_budget, j.cap_budget,
          j.available));
    }
  }

  if (!errors.empty()) throw ConfigError(errors);
  Scenario scenario{*local, *remote, ctrl, sc.initial, sc.forces, sc.horizon, sc.dt,
                    sc.decimation, sc.integrator, sc.delay, sc.tol};
  return {name, std::move(scenario), sample_interval, trace_path, audit_path};
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  if (const auto dot = name.rfind('.'); dot != std::string::npos && dot > 0) {
    name = name.substr(0, dot);
  }
  return parse_scenario(ss.str(), name);
}

std::string serialize_scenario(const ScenarioConfig& config) {
  const Scenario& sc = config.scenario;
  std::string s;
  auto robot = [&](const char* sec, const RobotParams& p) {
    s += fmt::format("[{}]\n", sec);
    s += fmt::format("mass = {}\n", fmt_vec(p.mass()));
    s += fmt::format("length = {}\n", fmt_vec(p.length()));
    s += fmt::format("com = {}\n", fmt_vec(p.com()));
    s += fmt::format("inertia = {}\n", fmt_vec(p.inertia()));
    s += fmt::format("gravity = {:.17g}\n", p.gravity());
    s += fmt::format("torque_limit = {}\n\n",
                     p.torque_limits() ? fmt_vec(*p.torque_limits()) : "unlimited");
  };
  robot("local", sc.local);
  robot("remote", sc.remote);
  const ControllerConfig& c = sc.controller;
  s += "[controller]\n";
  s += fmt::format("variant = {}\nr1 = {:.17g}\nr2 = {:.17g}\nks = {}\n", to_string(c.variant),
                   c.weights.r1, c.weights.r2, fmt_vec(c.ks));
  if (has_virtual_state(c.variant)) {
    s += fmt::format("kc_local = {}\nkc_remote = {}\n", fmt_vec(c.local.kc), fmt_vec(c.remote.kc));
    s += fmt::format("dc_local = {}\ndc_remote = {}\n", fmt_vec(c.local.dc), fmt_vec(c.remote.dc));
  } else {
    s += fmt::format("ds_local = {}\nds_remote = {}\n", fmt_vec(c.local.ds), fmt_vec(c.remote.ds));
  }
  if (is_saturated(c.variant)) {
    s += fmt::format("delta_u = {:.17g}\ndelta_f = {:.17g}\n", c.delta_u, c.delta_f);
  }
  s += "\n[initial]\n";
  s += fmt::format("q_local = {}\nq_remote = {}\n", fmt_vec(sc.initial.local.q),
                   fmt_vec(sc.initial.remote.q));
  s += fmt::format("qdot_local = {}\nqdot_remote = {}\n", fmt_vec(sc.initial.local.qdot),
                   fmt_vec(sc.initial.remote.qdot));
  if (has_virtual_state(c.variant)) {
    s += fmt::format("theta_local = {}\ntheta_remote = {}\n", fmt_vec(sc.initial.ctrl.theta_l),
                     fmt_vec(sc.initial.ctrl.theta_r));
  }
  auto force = [&](const char* sec, const ForceProfile& f) {
    s += fmt::format("\n[{}]\nkind = {}\n", sec, to_string(f.kind));
    if (f.kind == ForceKind::Zero) return;
    s += fmt::format("start = {:.17g}\n", f.start);
    if (std::isfinite(f.stop)) s += fmt::format("stop = {:.17g}\n", f.stop);
    if (f.kind == ForceKind::Pulse) s += fmt::format("amplitude = {}\n", fmt_vec(f.amplitude));
    if (f.kind == ForceKind::SpringDamper) {
      s += fmt::format("stiffness = {}\ndamping = {}\nanchor = {}\n", fmt_vec(f.stiffness),
                       fmt_vec(f.damping), fmt_vec(f.anchor));
    }
  };
  force("force.local", sc.forces.local);
  force("force.remote", sc.forces.remote);
  s += "\n[sim]\n";
  s += fmt::format("horizon = {:.17g}\ndt = {:.17g}\nsample_interval = {:.17g}\n", sc.horizon,
                   sc.dt, config.sample_interval);
  s += fmt::format("integrator = {}\ndelay = {:.17g}\ntol = {:.17g}\n",
                   sc.integrator == Integrator::Euler ? "euler" : "rk4", sc.delay, sc.tol);
  s += fmt::format("\n[output]\ntrace = {}\naudit = {}\n", config.trace_path, config.audit_path);
  return s;
}

void set_time_step(ScenarioConfig& config, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (dt > config.sample_interval) {
    throw std::invalid_argument("dt must not exceed the sample interval");
  }
  config.scenario.dt = dt;
  config.scenario.decimation =
      std::max(1, static_cast<int>(std::lround(config.sample_interval / dt)));
}

}  // namespace ftteleop
