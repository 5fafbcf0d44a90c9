#include "ftteleop/controllers.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ftteleop {

namespace {

const RobotState& pick(Side s, const RobotState& l, const RobotState& r) {
  return s == Side::Local ? l : r;
}

Vector virtual_error(const Vector& theta, const Vector& q) {
  if (theta.size() != q.size()) {
    throw std::invalid_argument("virtual state has " + std::to_string(theta.size()) +
                                " entries, robot has " + std::to_string(q.size()));
  }
  return theta - q;
}

void require_variant(const ControllerConfig& c, Variant v) {
  if (c.variant != v) {
    throw std::invalid_argument("controller configured as " + to_string(c.variant) +
                                ", called as " + to_string(v));
  }
}

double sum_abs_pow(const Vector& gain, const Vector& x, double p) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) acc += gain[k] * std::pow(std::abs(x[k]), p);
  return acc;
}

void check_gain(std::vector<std::string>& errors, const Vector& g, int dof, const char* name,
                bool allow_zero) {
  if (g.size() != dof) {
    errors.push_back(std::string(name) + " has " + std::to_string(g.size()) +
                     " entries, expected " + std::to_string(dof));
    return;
  }
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const bool ok = std::isfinite(g[k]) && (allow_zero ? g[k] >= 0.0 : g[k] > 0.0);
    if (!ok) {
      errors.push_back(std::string(name) + "[" + std::to_string(k + 1) + "] = " +
                       std::to_string(g[k]) + " must be " +
                       (allow_zero ? "nonnegative" : "positive"));
    }
  }
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::C1: return "C1";
    case Variant::C2: return "C2";
    case Variant::C3: return "C3";
    case Variant::C4: return "C4";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "C1" || s == "c1") return Variant::C1;
  if (s == "C2" || s == "c2") return Variant::C2;
  if (s == "C3" || s == "c3") return Variant::C3;
  if (s == "C4" || s == "c4") return Variant::C4;
  throw std::invalid_argument("unknown controller variant '" + s + "' (expected C1..C4)");
}

Exponents derive_exponents(const Weights& w) {
  if (!(w.r1 > 0.0) || !(w.r2 > 0.0)) {
    throw std::invalid_argument("homogeneity weights must be positive");
  }
  if (!(2.0 * w.r2 > w.r1)) {
    throw std::invalid_argument(
        "weight condition 2*r2 > r1 violated: r1 >= 2*r2 gives discontinuous controllers");
  }
  if (w.r1 < w.r2) {
    throw std::invalid_argument(
        "weight condition r1 >= r2 violated: r1 > r2 for finite time, r1 = r2 for the "
        "asymptotic limit");
  }
  return {(2.0 * w.r2 - w.r1) / w.r1, (2.0 * w.r2 - w.r1) / w.r2};
}

std::vector<std::string> check_config(const ControllerConfig& config, int dof) {
  std::vector<std::string> errors;
  try {
    (void)derive_exponents(config.weights);
  } catch (const std::invalid_argument& e) {
    errors.emplace_back(e.what());
  }
  check_gain(errors, config.ks, dof, "ks", false);
  for (const Side side : {Side::Local, Side::Remote}) {
    const RobotGains& g = config.gains(side);
    const bool local = side == Side::Local;
    if (has_virtual_state(config.variant)) {
      check_gain(errors, g.kc, dof, local ? "kc_local" : "kc_remote", false);
      check_gain(errors, g.dc, dof, local ? "dc_local" : "dc_remote", false);
    } else {
      // C3 needs strictly positive damping for its bounded dissipation.
      check_gain(errors, g.ds, dof, local ? "ds_local" : "ds_remote",
                 config.variant == Variant::C1);
    }
  }
  if (is_saturated(config.variant)) {
    if (!(config.delta_u > 0.0) || !std::isfinite(config.delta_u)) {
      errors.emplace_back("delta_u must be positive");
    }
    if (!(config.delta_f > 0.0) || !std::isfinite(config.delta_f)) {
      errors.emplace_back("delta_f must be positive");
    }
  }
  return errors;
}

void validate_config(const ControllerConfig& config, int dof) {
  const auto errors = check_config(config, dof);
  if (errors.empty()) return;
  std::ostringstream msg;
  msg << "invalid controller configuration:";
  for (const auto& e : errors) msg << "\n  " << e;
  throw std::invalid_argument(msg.str());
}

ControllerState initial_controller_state(const ControllerConfig& config, const Vector& q_l,
                                         const Vector& q_r) {
  if (!has_virtual_state(config.variant)) return {};
  return {q_l, q_r};
}

Vector robot_torque(const ControllerConfig& config, Side side, const RobotParams& params,
                    const RobotState& own, const Vector& q_other, const Vector& theta) {
  const auto [p_u, p_f] = config.exponents();
  const RobotGains& g = config.gains(side);
  if (q_other.size() != own.q.size() || own.qdot.size() != own.q.size()) {
    throw std::invalid_argument("robot_torque: state dimension mismatch");
  }
  const Vector e = own.q - q_other;
  Vector tau = gravity_vector(params, own.q);
  switch (config.variant) {
    case Variant::C1:
      tau -= config.ks.cwiseProduct(signed_pow(e, p_u)) +
             g.ds.cwiseProduct(signed_pow(own.qdot, p_f));
      break;
    case Variant::C2:
      tau += -config.ks.cwiseProduct(signed_pow(e, p_u)) +
             g.kc.cwiseProduct(signed_pow(virtual_error(theta, own.q), p_u));
      break;
    case Variant::C3:
      tau -= config.ks.cwiseProduct(sat_pow(e, p_u, config.delta_u)) +
             g.ds.cwiseProduct(sat_pow(own.qdot, p_f, config.delta_f));
      break;
    case Variant::C4:
      tau += -config.ks.cwiseProduct(sat_pow(e, p_u, config.delta_u)) +
             g.kc.cwiseProduct(sat_pow(virtual_error(theta, own.q), p_u, config.delta_f));
      break;
  }
  return tau;
}

Vector theta_rate(const ControllerConfig& config, Side side, const Vector& q,
                  const Vector& theta) {
  if (!has_virtual_state(config.variant)) return {};
  const auto [p_u, p_f] = config.exponents();
  const RobotGains& g = config.gains(side);
  const double exponent = config.weights.r2 / config.weights.r1;
  const Vector err = virtual_error(theta, q);
  const Vector shaped = config.variant == Variant::C2 ? signed_pow(err, exponent)
                                                      : sat_pow(err, exponent, config.delta_f);
  Vector rate(q.size());
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (!(g.dc[k] > 0.0)) throw std::invalid_argument("virtual damping dc must be positive");
    rate[k] = -std::pow(g.kc[k] / g.dc[k], 1.0 / p_f) * shaped[k];
  }
  return rate;
}

TorquesAndRates control(const ControllerConfig& config, const RobotParams& params_l,
                        const RobotParams& params_r, const RobotState& state_l,
                        const RobotState& state_r, const ControllerState& ctrl) {
  TorquesAndRates out;
  out.tau_l = robot_torque(config, Side::Local, params_l, state_l, state_r.q, ctrl.theta_l);
  out.tau_r = robot_torque(config, Side::Remote, params_r, state_r, state_l.q, ctrl.theta_r);
  out.theta_dot_l = theta_rate(config, Side::Local, state_l.q, ctrl.theta_l);
  out.theta_dot_r = theta_rate(config, Side::Remote, state_r.q, ctrl.theta_r);
  return out;
}

TorquePair c1_torques(const ControllerConfig& config, const RobotParams& params_l,
                      const RobotParams& params_r, const RobotState& state_l,
                      const RobotState& state_r) {
  require_variant(config, Variant::C1);
  auto out = control(config, params_l, params_r, state_l, state_r, {});
  return {out.tau_l, out.tau_r};
}

TorquesAndRates c2_torques_and_theta_dot(const ControllerConfig& config,
                                         const RobotParams& params_l,
                                         const RobotParams& params_r, const RobotState& state_l,
                                         const RobotState& state_r, const ControllerState& ctrl) {
  require_variant(config, Variant::C2);
  return control(config, params_l, params_r, state_l, state_r, ctrl);
}

TorquePair c3_torques(const ControllerConfig& config, const RobotParams& params_l,
                      const RobotParams& params_r, const RobotState& state_l,
                      const RobotState& state_r) {
  require_variant(config, Variant::C3);
  auto out = control(config, params_l, params_r, state_l, state_r, {});
  return {out.tau_l, out.tau_r};
}

TorquesAndRates c4_torques_and_theta_dot(const ControllerConfig& config,
                                         const RobotParams& params_l,
                                         const RobotParams& params_r, const RobotState& state_l,
                                         const RobotState& state_r, const ControllerState& ctrl) {
  require_variant(config, Variant::C4);
  return control(config, params_l, params_r, state_l, state_r, ctrl);
}

double desired_potential(const ControllerConfig& config, const Vector& q_l, const Vector& q_r,
                         const ControllerState& ctrl) {
  const auto [p_u, p_f] = config.exponents();
  const Vector e = q_l - q_r;
  double u = 0.0;
  if (is_saturated(config.variant)) {
    for (Eigen::Index k = 0; k < e.size(); ++k) {
      u += config.ks[k] * s_integral(e[k], config.delta_u, p_u);
    }
  } else {
    u += sum_abs_pow(config.ks, e, p_u + 1.0) / (p_u + 1.0);
  }
  if (!has_virtual_state(config.variant)) return u;
  for (const Side side : {Side::Local, Side::Remote}) {
    const Vector err = side == Side::Local ? virtual_error(ctrl.theta_l, q_l)
                                           : virtual_error(ctrl.theta_r, q_r);
    const Vector& kc = config.gains(side).kc;
    if (config.variant == Variant::C4) {
      for (Eigen::Index k = 0; k < err.size(); ++k) {
        u += kc[k] * s_integral(err[k], config.delta_f, p_u);
      }
    } else {
      u += sum_abs_pow(kc, err, p_u + 1.0) / (p_u + 1.0);
    }
  }
  return u;
}

double dissipation_rate(const ControllerConfig& config, const RobotState& state_l,
                        const RobotState& state_r, const ControllerState& ctrl) {
  const auto [p_u, p_f] = config.exponents();
  double rate = 0.0;
  for (const Side side : {Side::Local, Side::Remote}) {
    const RobotState& s = pick(side, state_l, state_r);
    const RobotGains& g = config.gains(side);
    switch (config.variant) {
      case Variant::C1:
        rate -= sum_abs_pow(g.ds, s.qdot, p_f + 1.0);
        break;
      case Variant::C3:
        for (Eigen::Index k = 0; k < s.qdot.size(); ++k) {
          rate -= g.ds[k] * s.qdot[k] * sat_pow(s.qdot[k], p_f, config.delta_f);
        }
        break;
      case Variant::C2:
      case Variant::C4: {
        const Vector& theta = side == Side::Local ? ctrl.theta_l : ctrl.theta_r;
        rate -= sum_abs_pow(g.dc, theta_rate(config, side, s.q, theta), p_f + 1.0);
        break;
      }
    }
  }
  return rate;
}

bool SaturationReport::pass() const {
  if (unlimited) return true;
  for (const auto& j : joints)
    if (!j.pass) return false;
  return true;
}

JointSaturationCheck check_joint_saturation(double ks, double damping_gain, double delta_u,
                                            double delta_f, double p_u, double p_damping,
                                            double tau_limit, double g_bound) {
  JointSaturationCheck c;
  c.literal_budget = ks * delta_u + damping_gain * delta_f;
  c.cap_budget = ks * std::pow(delta_u, p_u) + damping_gain * std::pow(delta_f, p_damping);
  c.available = tau_limit - g_bound;
  c.pass = c.margin() > 0.0;
  return c;
}

SaturationReport validate_saturation(const ControllerConfig& config,
                                     const RobotParams& params_l,
                                     const RobotParams& params_r) {
  SaturationReport report;
  report.unlimited = !params_l.torque_limits() && !params_r.torque_limits();
  if (report.unlimited) return report;
  const auto [p_u, p_f] = config.exponents();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (const Side side : {Side::Local, Side::Remote}) {
    const RobotParams& params = side == Side::Local ? params_l : params_r;
    if (!params.torque_limits()) continue;
    const Vector& limits = *params.torque_limits();
    const RobotGains& g = config.gains(side);
    for (int k = 0; k < params.dof(); ++k) {
      JointSaturationCheck c;
      switch (config.variant) {
        case Variant::C3:
          c = check_joint_saturation(config.ks[k], g.ds[k], config.delta_u, config.delta_f,
                                     p_u, p_f, limits[k], params.bounds().gravity[k]);
          break;
        case Variant::C4:
          c = check_joint_saturation(config.ks[k], g.kc[k], config.delta_u, config.delta_f,
                                     p_u, p_u, limits[k], params.bounds().gravity[k]);
          break;
        default:
          c.literal_budget = c.cap_budget = kInf;
          c.available = limits[k] - params.bounds().gravity[k];
          c.pass = false;
          break;
      }
      c.side = side;
      c.joint = k;
      report.joints.push_back(c);
    }
  }
  return report;
}

}  // namespace ftteleop
