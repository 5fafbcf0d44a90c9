#pragma once

#include <Eigen/Dense>

namespace ftteleop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Homogeneity weights for position-like (r1) and velocity-like (r2) coordinates.
struct Weights {
  double r1 = 1.0;
  double r2 = 1.0;

  /// True when 2*r2 > r1 > r2 > 0, the regime that yields finite-time convergence.
  [[nodiscard]] bool finite_time() const { return 2.0 * r2 > r1 && r1 > r2 && r2 > 0.0; }
  /// True for r1 == r2, the asymptotic (linear) limit.
  [[nodiscard]] bool asymptotic() const { return r1 == r2 && r1 > 0.0; }
  /// Homogeneity degree r2 - r1 of the closed loop.
  [[nodiscard]] double degree() const { return r2 - r1; }
};

// sign(0) is 0; the signed power is continuous through the origin.
double sign(double x);

/// |x|^p sign(x). Throws std::invalid_argument for p <= 0 or non-finite x.
double signed_pow(double x, double p);

/// Signed power capped at magnitude delta^p once |x| >= delta.
double sat_pow(double x, double p, double delta);

/// Plain magnitude clip of x at delta.
double sat_clip(double x, double delta);

/// Integral of sat_pow from 0 to x. C1, nonnegative, zero only at the origin.
double s_integral(double x, double delta, double p);

// Element-wise versions.
Vector signed_pow(const Vector& x, double p);
Vector sat_pow(const Vector& x, double p, double delta);

/// Weighted dilation: component j becomes epsilon^{weights_j} * x_j.
Vector dilate(const Vector& x, const Vector& weights, double epsilon);

}  // namespace ftteleop
