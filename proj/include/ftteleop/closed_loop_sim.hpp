#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftteleop/controllers.hpp"
#include "ftteleop/robot_dynamics.hpp"

namespace ftteleop {

/// Raised when the integrated state stops being finite.
class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  [[nodiscard]] double time() const { return time_; }

 private:
  double time_;
};

enum class ForceKind { Zero, Pulse, SpringDamper };

/// Scripted external force on one robot.
///
/// Pulse: constant `amplitude` on [start, stop). SpringDamper: a passive environment
/// f = -stiffness (q - anchor) - damping qdot, active on [start, stop).
struct ForceProfile {
  ForceKind kind = ForceKind::Zero;
  double start = 0.0;
  double stop = std::numeric_limits<double>::infinity();
  Vector amplitude;
  Vector stiffness;
  Vector damping;
  Vector anchor;

  [[nodiscard]] Vector evaluate(double t, const RobotState& s) const;
  /// Throws std::invalid_argument for negative spring/damper coefficients or size mismatch.
  void validate(int dof) const;
};

std::string to_string(ForceKind k);

enum class Integrator { Euler, RK4 };

struct TeleopState {
  RobotState local;
  RobotState remote;
  ControllerState ctrl;
  double time = 0.0;
};

struct ForceProfiles {
  ForceProfile local;
  ForceProfile remote;
};

struct Scenario {
  RobotParams local;
  RobotParams remote;
  ControllerConfig controller;
  TeleopState initial;
  ForceProfiles forces;
  double horizon = 8.0;
  double dt = 1e-4;
  int decimation = 10;  // record every N-th step
  Integrator integrator = Integrator::Euler;
  double delay = 0.0;   // constant one-way delay on exchanged positions, experimental
  double tol = 1e-3;    // settling tolerance on |q_l - q_r|
};

/// Decimated time series of one closed-loop run.
struct SimTrace {
  int dof = 0;
  bool has_theta = false;
  std::vector<double> t;
  std::vector<Vector> q_l, q_r, qd_l, qd_r, th_l, th_r, tau_l, tau_r, f_l, f_r;
  std::vector<double> err_norm;
  std::vector<double> energy;  // desired potential plus kinetic energies, ledger excluded
  // Largest |tau_k| over every integration step, not only recorded samples.
  Vector max_abs_tau_l, max_abs_tau_r;
  std::optional<double> settling_time;

  [[nodiscard]] std::size_t size() const { return t.size(); }
};

/// One explicit Euler step (or RK4 when requested) of the coupled closed loop.
/// Throws InstabilityError if the new state is not finite.
TeleopState step(const TeleopState& state, const ControllerConfig& config,
                 const RobotParams& params_l, const RobotParams& params_r,
                 const ForceProfiles& forces, double dt,
                 Integrator integrator = Integrator::Euler);

SimTrace run(const Scenario& scenario);

/// Runs independent scenarios concurrently. Output order matches input order.
std::vector<SimTrace> run_batch(const std::vector<Scenario>& scenarios);

/// First recorded time after which |q_l - q_r| stays below tol until the end of the trace.
std::optional<double> convergence_time(const SimTrace& trace, double tol);

struct EnergySample {
  double t = 0.0;
  double energy = 0.0;
  double rate_analytic = 0.0;
  double rate_numeric = 0.0;
};

struct EnergyAudit {
  std::vector<EnergySample> samples;
  int positive_rate_samples = 0;  // samples with analytic dH/dt > 0
  double max_increase = 0.0;      // largest H(t_{k+1}) - H(t_k), or 0
  std::vector<std::size_t> flagged;  // samples where H rose by more than the tolerance
  [[nodiscard]] bool pass() const { return positive_rate_samples == 0 && flagged.empty(); }
};

/// Recomputes H along a free-motion trace and compares its closed-form rate with
/// finite differences. Throws std::invalid_argument if any recorded force is nonzero.
EnergyAudit energy_audit(const SimTrace& trace, const ControllerConfig& config,
                         const RobotParams& params_l, const RobotParams& params_r,
                         double increase_tolerance = 0.0);

struct PassivityLedger {
  std::vector<double> work_l, work_r;  // running integral of qdot^T f
  double kappa_l = 0.0;
  double kappa_r = 0.0;
  std::vector<double> ledger_l, ledger_r;  // kappa - work, nonnegative
};

/// Trapezoidal work integrals with the smallest kappa keeping each ledger nonnegative.
PassivityLedger passivity_ledger(const SimTrace& trace);

void write_trace_csv(const SimTrace& trace, std::ostream& out);
/// Writes to a temporary file next to `path` and renames it into place.
void write_trace_csv(const SimTrace& trace, const std::string& path);
SimTrace read_trace_csv(std::istream& in);

}  // namespace ftteleop
