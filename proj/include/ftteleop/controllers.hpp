#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ftteleop/robot_dynamics.hpp"
#include "ftteleop/scalar_ops.hpp"

namespace ftteleop {

/// C1: state-feedback P+d. C2: output-feedback P+d with virtual states.
/// C3/C4: the saturated versions of C1/C2.
enum class Variant { C1, C2, C3, C4 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

/// True for the variants that carry virtual controller states (C2, C4).
inline bool has_virtual_state(Variant v) { return v == Variant::C2 || v == Variant::C4; }
inline bool is_saturated(Variant v) { return v == Variant::C3 || v == Variant::C4; }

enum class Side { Local, Remote };

struct Exponents {
  double p_u = 1.0;  // proportional exponent (2 r2 - r1) / r1
  double p_f = 1.0;  // dissipation exponent  (2 r2 - r1) / r2
};

/// Throws std::invalid_argument unless r2 <= r1 < 2 r2.
Exponents derive_exponents(const Weights& w);

/// Per-robot gains. Only the entries relevant to the variant are used:
/// `ds` by C1/C3, `kc` and `dc` by C2/C4.
struct RobotGains {
  Vector ds;
  Vector kc;
  Vector dc;
};

struct ControllerConfig {
  Variant variant = Variant::C1;
  Weights weights{1.5, 1.0};
  Vector ks;  // coupling stiffness, shared by both robots
  RobotGains local;
  RobotGains remote;
  double delta_u = 1.0;  // proportional saturation level (C3/C4)
  double delta_f = 1.0;  // damping / virtual-state saturation level (C3/C4)

  [[nodiscard]] Exponents exponents() const { return derive_exponents(weights); }
  [[nodiscard]] const RobotGains& gains(Side s) const {
    return s == Side::Local ? local : remote;
  }
};

/// Returns every violated constraint for a controller acting on robots with `dof` joints.
std::vector<std::string> check_config(const ControllerConfig& config, int dof);

/// Throws std::invalid_argument listing all problems found by check_config.
void validate_config(const ControllerConfig& config, int dof);

/// Virtual positions of the output-feedback variants; empty vectors otherwise.
struct ControllerState {
  Vector theta_l;
  Vector theta_r;
};

/// theta(0) = q(0) for the variants that use it.
ControllerState initial_controller_state(const ControllerConfig& config, const Vector& q_l,
                                         const Vector& q_r);

struct TorquePair {
  Vector tau_l;
  Vector tau_r;
};

struct TorquesAndRates {
  Vector tau_l;
  Vector tau_r;
  Vector theta_dot_l;
  Vector theta_dot_r;
};

TorquePair c1_torques(const ControllerConfig& config, const RobotParams& params_l,
                      const RobotParams& params_r, const RobotState& state_l,
                      const RobotState& state_r);

TorquesAndRates c2_torques_and_theta_dot(const ControllerConfig& config,
                                         const RobotParams& params_l,
                                         const RobotParams& params_r, const RobotState& state_l,
                                         const RobotState& state_r, const ControllerState& ctrl);

TorquePair c3_torques(const ControllerConfig& config, const RobotParams& params_l,
                      const RobotParams& params_r, const RobotState& state_l,
                      const RobotState& state_r);

TorquesAndRates c4_torques_and_theta_dot(const ControllerConfig& config,
                                         const RobotParams& params_l,
                                         const RobotParams& params_r, const RobotState& state_l,
                                         const RobotState& state_r, const ControllerState& ctrl);

/// Torque applied to one robot given its own state, the other robot's position as
/// received over the channel, and its virtual state (ignored by C1/C3).
Vector robot_torque(const ControllerConfig& config, Side side, const RobotParams& params,
                    const RobotState& own, const Vector& q_other, const Vector& theta);

/// Virtual-state rate for C2/C4; zero-length for C1/C3.
Vector theta_rate(const ControllerConfig& config, Side side, const Vector& q,
                  const Vector& theta);

/// Dispatches on the variant; theta rates are empty for C1/C3.
TorquesAndRates control(const ControllerConfig& config, const RobotParams& params_l,
                        const RobotParams& params_r, const RobotState& state_l,
                        const RobotState& state_r, const ControllerState& ctrl);

/// Desired potential energy shaped by the controller (coupling spring plus the
/// robot/controller springs of C2/C4).
double desired_potential(const ControllerConfig& config, const Vector& q_l, const Vector& q_r,
                         const ControllerState& ctrl);

/// Closed-form dH/dt in free motion: minus the power dissipated by damping
/// injection (C1/C3) or by the virtual-state dynamics (C2/C4). Always <= 0.
double dissipation_rate(const ControllerConfig& config, const RobotState& state_l,
                        const RobotState& state_r, const ControllerState& ctrl);

struct JointSaturationCheck {
  Side side = Side::Local;
  int joint = 0;
  double literal_budget = 0.0;  // Ks dU + D dF, without exponents
  double cap_budget = 0.0;      // Ks dU^pU + D dF^p, the caps the saturation actually enforces
  double available = 0.0;       // tau_max - g_k
  bool pass = false;

  /// Gate uses the larger of the two budgets.
  [[nodiscard]] double margin() const {
    return available - std::max(literal_budget, cap_budget);
  }
};

struct SaturationReport {
  std::vector<JointSaturationCheck> joints;
  bool unlimited = false;  // no torque limits on either robot

  [[nodiscard]] bool pass() const;
};

/// Checks one joint of the saturation budget condition
/// Ks dU + D dF < tau_max - g_k, reporting both the literal and the capped budget.
JointSaturationCheck check_joint_saturation(double ks, double damping_gain, double delta_u,
                                            double delta_f, double p_u, double p_damping,
                                            double tau_limit, double g_bound);

/// Per-joint saturation budget for both robots. Unsaturated variants fail whenever
/// a torque limit is finite, since their torque is not bounded a priori.
SaturationReport validate_saturation(const ControllerConfig& config,
                                     const RobotParams& params_l, const RobotParams& params_r);

}  // namespace ftteleop
