#pragma once

#include <optional>
#include <vector>

#include "ftteleop/scalar_ops.hpp"

namespace ftteleop {

/// Constants bounding the manipulator model over the whole configuration torus.
struct ModelBounds {
  double m1 = 0.0;         // lower inertia bound, m1 I <= M(q)
  double m2 = 0.0;         // upper inertia bound, M(q) <= m2 I
  double coriolis = 0.0;   // L_c with |C(q,v)v| <= L_c |v|^2
  Vector gravity;          // g_k with |dU/dq_k| <= g_k
};

/// Physical description of a planar serial arm with revolute joints.
///
/// Link k is a point mass at distance `com[k]` along a rod of length `length[k]`
/// plus a rotor inertia `inertia[k]` about its center of mass. Joint angles are
/// relative; q = 0 stretches the arm along the horizontal axis and gravity, when
/// nonzero, acts along the negative vertical axis of the plane.
///
/// Instances are immutable. The inertia, Coriolis and gravity bounds are sampled
/// once at construction.
class RobotParams {
 public:
  RobotParams(Vector mass, Vector length, Vector com, Vector inertia, double gravity,
              std::optional<Vector> torque_limits = std::nullopt);

  [[nodiscard]] int dof() const { return static_cast<int>(mass_.size()); }
  [[nodiscard]] const Vector& mass() const { return mass_; }
  [[nodiscard]] const Vector& length() const { return length_; }
  [[nodiscard]] const Vector& com() const { return com_; }
  [[nodiscard]] const Vector& inertia() const { return inertia_; }
  [[nodiscard]] double gravity() const { return gravity_; }
  [[nodiscard]] const std::optional<Vector>& torque_limits() const { return torque_limits_; }
  [[nodiscard]] const ModelBounds& bounds() const { return bounds_; }

 private:
  Vector mass_, length_, com_, inertia_;
  double gravity_ = 0.0;
  std::optional<Vector> torque_limits_;
  ModelBounds bounds_;
};

struct RobotState {
  Vector q;
  Vector qdot;
};

struct Energies {
  double kinetic = 0.0;
  double potential = 0.0;
};

Matrix mass_matrix(const RobotParams& params, const Vector& q);

/// Partial derivatives dM/dq_i, one matrix per joint.
std::vector<Matrix> mass_matrix_gradient(const RobotParams& params, const Vector& q);

/// Coriolis/centrifugal matrix built from Christoffel symbols of the first kind,
/// so that dM/dt - 2C is skew-symmetric.
Matrix coriolis_matrix(const RobotParams& params, const Vector& q, const Vector& qdot);

Vector gravity_vector(const RobotParams& params, const Vector& q);

double potential_energy(const RobotParams& params, const Vector& q);

/// qddot = M^{-1} (tau + f_ext - C qdot - grad U).
/// Throws std::runtime_error when the inertia factorization is singular.
Vector forward_dynamics(const RobotParams& params, const RobotState& state, const Vector& tau,
                        const Vector& f_ext);

/// Solves M(q) x = rhs with a Cholesky factorization.
Vector solve_inertia(const RobotParams& params, const Vector& q, const Vector& rhs);

Energies energies(const RobotParams& params, const RobotState& state);

/// Sampled bounds over at least 1e4 configurations with a 5% safety margin.
ModelBounds derive_bounds(const RobotParams& params);

}  // namespace ftteleop
