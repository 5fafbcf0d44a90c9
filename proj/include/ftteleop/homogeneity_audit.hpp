#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "ftteleop/controllers.hpp"
#include "ftteleop/robot_dynamics.hpp"

namespace ftteleop {

// Closed-loop coordinates used throughout the audit, for n joints per robot:
//   [ qt_l (n), qt_r (n), qdot_l (n), qdot_r (n), thetat_l (n), thetat_r (n) ]
// with qt_i = q_i - q_c and thetat_i = theta_i - q_i. The virtual-state block is
// present only for C2/C4. Position-like and virtual coordinates carry weight r1,
// velocities r2.

using Field = std::function<Vector(const Vector&)>;

struct HomogeneitySpec {
  Vector weights;
  double degree = 0.0;            // r2 - r1
  int sphere_samples = 256;
  std::vector<double> epsilons;   // strictly decreasing toward 0
  std::uint64_t seed = 1;
};

/// Weights and degree for a controller, with a log-spaced grid from 1 down to 1e-3.
HomogeneitySpec make_homogeneity_spec(const ControllerConfig& config, int dof,
                                      int sphere_samples = 256, std::uint64_t seed = 1,
                                      int grid_points = 13);

int closed_loop_dimension(const ControllerConfig& config, int dof);

/// Frozen-inertia homogeneous approximation of the closed loop around q_c.
/// Saturated variants share the unsaturated approximation.
Vector homogeneous_part(const ControllerConfig& config, const RobotParams& params_l,
                        const RobotParams& params_r, const Vector& q_c, const Vector& x);

/// The complete free-motion closed-loop vector field in the same coordinates.
Vector closed_loop_field(const ControllerConfig& config, const RobotParams& params_l,
                         const RobotParams& params_r, const Vector& q_c, const Vector& x);

/// Deterministic, quasi-uniform points on the unit sphere S^{dim-1}
/// (scrambled Halton sequence pushed through Box-Muller).
std::vector<Vector> sphere_samples(int dim, int count, std::uint64_t seed);

/// Largest relative defect |eps^{-(l+r_j)} f_j(D_eps x) - f_j(x)| / (|f_j(x)| + 1e-12)
/// over the sample points and the spec's epsilon grid.
double check_degree(const Field& field, const HomogeneitySpec& spec,
                    const std::vector<Vector>& points);

struct SweepRow {
  double epsilon = 0.0;
  double deviation = 0.0;  // sup over sampled x of |eps^{-l} D_eps^{-1} f(D_eps x) - f_H(x)|
  int nonfinite = 0;       // samples whose evaluation was not finite
};

std::vector<SweepRow> vanishing_sweep(const ControllerConfig& config,
                                      const RobotParams& params_l,
                                      const RobotParams& params_r, const Vector& q_c,
                                      const HomogeneitySpec& spec);

/// Least-squares slope of log(deviation) against log(epsilon) over the rows with
/// epsilon in [lo, hi].
double loglog_slope(const std::vector<SweepRow>& rows, double lo, double hi);

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace ftteleop
