#include "ftteleop/robot_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace ftteleop {

namespace {

constexpr double kBoundMargin = 1.05;
constexpr int kMinBoundSamples = 10000;
constexpr double kMinReciprocalCondition = 1e-12;

void check_dof(const RobotParams& params, const Vector& v, const char* what) {
  if (v.size() != params.dof()) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(v.size()) +
                                " entries, robot has " + std::to_string(params.dof()) +
                                " joints");
  }
}

// Absolute link angles phi_j = q_0 + ... + q_j.
Vector absolute_angles(const Vector& q) {
  Vector phi(q.size());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    acc += q[j];
    phi[j] = acc;
  }
  return phi;
}

// Lever arm of segment j when computing the center of mass of link k (j <= k).
double lever(const RobotParams& p, int j, int k) { return j < k ? p.length()[j] : p.com()[k]; }

// Linear-velocity Jacobian (2 x n) of the center of mass of link k.
Matrix com_jacobian(const RobotParams& p, const Vector& phi, int k) {
  const int n = p.dof();
  Matrix jac = Matrix::Zero(2, n);
  for (int a = 0; a <= k; ++a) {
    for (int j = a; j <= k; ++j) {
      const double r = lever(p, j, k);
      jac(0, a) -= r * std::sin(phi[j]);
      jac(1, a) += r * std::cos(phi[j]);
    }
  }
  return jac;
}

// d(com_jacobian)/dq_i.
Matrix com_jacobian_derivative(const RobotParams& p, const Vector& phi, int k, int i) {
  const int n = p.dof();
  Matrix djac = Matrix::Zero(2, n);
  for (int a = 0; a <= k; ++a) {
    for (int j = std::max(a, i); j <= k; ++j) {
      const double r = lever(p, j, k);
      djac(0, a) -= r * std::cos(phi[j]);
      djac(1, a) -= r * std::sin(phi[j]);
    }
  }
  return djac;
}

// Christoffel symbols c[k](i, j) = 0.5 (dM_kj/dq_i + dM_ki/dq_j - dM_ij/dq_k).
std::vector<Matrix> christoffel(const std::vector<Matrix>& dm) {
  const auto n = static_cast<int>(dm.size());
  std::vector<Matrix> c(n, Matrix::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        c[k](i, j) = 0.5 * (dm[i](k, j) + dm[j](k, i) - dm[k](i, j));
  return c;
}

// Enumerates a regular grid on the torus with at least kMinBoundSamples points.
template <typename Fn>
void for_each_grid_configuration(int n, Fn&& fn) {
  const int per_axis = std::max(
      2, static_cast<int>(std::ceil(std::pow(static_cast<double>(kMinBoundSamples), 1.0 / n))));
  std::vector<int> idx(n, 0);
  Vector q(n);
  const double step = 2.0 * std::numbers::pi / per_axis;
  while (true) {
    for (int j = 0; j < n; ++j) q[j] = -std::numbers::pi + step * idx[j];
    fn(q);
    int j = 0;
    while (j < n && ++idx[j] == per_axis) idx[j++] = 0;
    if (j == n) break;
  }
}

// Unit directions for sampling the quadratic map v -> C(q,v)v.
std::vector<Vector> unit_directions(int n) {
  std::vector<Vector> dirs;
  if (n == 1) {
    dirs.push_back(Vector::Ones(1));
    return dirs;
  }
  if (n == 2) {
    constexpr int kCount = 180;
    for (int i = 0; i < kCount; ++i) {
      const double a = std::numbers::pi * i / kCount;  // v and -v give the same |C(q,v)v|
      Vector v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(v);
    }
    return dirs;
  }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 64; ++i) {
    Vector v(n);
    for (int j = 0; j < n; ++j) v[j] = normal(rng);
    dirs.push_back(v.normalized());
  }
  for (int j = 0; j < n; ++j) dirs.push_back(Vector::Unit(n, j));
  return dirs;
}

}  // namespace

RobotParams::RobotParams(Vector mass, Vector length, Vector com, Vector inertia,
                         double gravity, std::optional<Vector> torque_limits)
    : mass_(std::move(mass)),
      length_(std::move(length)),
      com_(std::move(com)),
      inertia_(std::move(inertia)),
      gravity_(gravity),
      torque_limits_(std::move(torque_limits)) {
  const auto n = mass_.size();
  if (n < 1) throw std::invalid_argument("robot needs at least one joint");
  if (length_.size() != n || com_.size() != n || inertia_.size() != n) {
    throw std::invalid_argument("mass, length, com and inertia must have the same length");
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(mass_[k] > 0.0)) throw std::invalid_argument("link masses must be positive");
    if (!(length_[k] > 0.0)) throw std::invalid_argument("link lengths must be positive");
    if (!(com_[k] >= 0.0)) throw std::invalid_argument("center-of-mass offsets must be >= 0");
    if (!(inertia_[k] >= 0.0)) throw std::invalid_argument("link inertias must be >= 0");
  }
  if (!std::isfinite(gravity_) || gravity_ < 0.0) {
    throw std::invalid_argument("gravity acceleration must be finite and >= 0");
  }
  bounds_ = derive_bounds(*this);
  if (!(bounds_.m1 > 0.0)) {
    throw std::invalid_argument("inertia matrix is not uniformly positive definite");
  }
  if (torque_limits_) {
    if (torque_limits_->size() != n) {
      throw std::invalid_argument("torque_limits must have one entry per joint");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!((*torque_limits_)[k] > bounds_.gravity[k])) {
        throw std::invalid_argument(
            "torque limit of joint " + std::to_string(k + 1) + " (" +
            std::to_string((*torque_limits_)[k]) + ") does not exceed gravity bound g_k = " +
            std::to_string(bounds_.gravity[k]) +
            " (the actuator must be able to lift its own link)");
      }
    }
  }
}

Matrix mass_matrix(const RobotParams& params, const Vector& q) {
  check_dof(params, q, "q");
  const int n = params.dof();
  const Vector phi = absolute_angles(q);
  Matrix m = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const Matrix jac = com_jacobian(params, phi, k);
    m += params.mass()[k] * jac.transpose() * jac;
    m.topLeftCorner(k + 1, k + 1).array() += params.inertia()[k];
  }
  return 0.5 * (m + m.transpose());
}

std::vector<Matrix> mass_matrix_gradient(const RobotParams& params, const Vector& q) {
  check_dof(params, q, "q");
  const int n = params.dof();
  const Vector phi = absolute_angles(q);
  std::vector<Matrix> dm(n, Matrix::Zero(n, n));
  for (int k = 0; k < n; ++k) {
    const Matrix jac = com_jacobian(params, phi, k);
    for (int i = 0; i <= k; ++i) {
      const Matrix djac = com_jacobian_derivative(params, phi, k, i);
      const Matrix term = djac.transpose() * jac;
      dm[i] += params.mass()[k] * (term + term.transpose());
    }
  }
  return dm;
}

Matrix coriolis_matrix(const RobotParams& params, const Vector& q, const Vector& qdot) {
  check_dof(params, qdot, "qdot");
  const auto c = christoffel(mass_matrix_gradient(params, q));
  const int n = params.dof();
  Matrix out(n, n);
  for (int k = 0; k < n; ++k) out.row(k) = (c[k].transpose() * qdot).transpose();
  return out;
}

Vector gravity_vector(const RobotParams& params, const Vector& q) {
  check_dof(params, q, "q");
  const int n = params.dof();
  Vector g = Vector::Zero(n);
  if (params.gravity() == 0.0) return g;
  const Vector phi = absolute_angles(q);
  for (int k = 0; k < n; ++k) {
    g += params.gravity() * params.mass()[k] * com_jacobian(params, phi, k).row(1).transpose();
  }
  return g;
}

double potential_energy(const RobotParams& params, const Vector& q) {
  check_dof(params, q, "q");
  const Vector phi = absolute_angles(q);
  double u = 0.0;
  for (int k = 0; k < params.dof(); ++k) {
    double height = 0.0;
    for (int j = 0; j <= k; ++j) height += lever(params, j, k) * std::sin(phi[j]);
    u += params.mass()[k] * params.gravity() * height;
  }
  return u;
}

Vector solve_inertia(const RobotParams& params, const Vector& q, const Vector& rhs) {
  check_dof(params, rhs, "right-hand side");
  const Eigen::LLT<Matrix> llt(mass_matrix(params, q));
  if (llt.info() != Eigen::Success || llt.rcond() < kMinReciprocalCondition) {
    throw std::runtime_error("inertia matrix is singular or not positive definite");
  }
  return llt.solve(rhs);
}

Vector forward_dynamics(const RobotParams& params, const RobotState& state, const Vector& tau,
                        const Vector& f_ext) {
  check_dof(params, state.qdot, "qdot");
  check_dof(params, tau, "tau");
  check_dof(params, f_ext, "f_ext");
  const Vector rhs = tau + f_ext - coriolis_matrix(params, state.q, state.qdot) * state.qdot -
                     gravity_vector(params, state.q);
  return solve_inertia(params, state.q, rhs);
}

Energies energies(const RobotParams& params, const RobotState& state) {
  check_dof(params, state.qdot, "qdot");
  return {0.5 * state.qdot.dot(mass_matrix(params, state.q) * state.qdot),
          potential_energy(params, state.q)};
}

ModelBounds derive_bounds(const RobotParams& params) {
  const int n = params.dof();
  const auto dirs = unit_directions(n);
  double lambda_min = std::numeric_limits<double>::infinity();
  double lambda_max = 0.0;
  double coriolis = 0.0;
  Vector grav = Vector::Zero(n);
  for_each_grid_configuration(n, [&](const Vector& q) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(mass_matrix(params, q),
                                                    Eigen::EigenvaluesOnly);
    lambda_min = std::min(lambda_min, eig.eigenvalues().minCoeff());
    lambda_max = std::max(lambda_max, eig.eigenvalues().maxCoeff());
    const auto c = christoffel(mass_matrix_gradient(params, q));
    for (const Vector& v : dirs) {
      double sq = 0.0;
      for (int k = 0; k < n; ++k) {
        double ck = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) ck += c[k](i, j) * v[i] * v[j];
        sq += ck * ck;
      }
      coriolis = std::max(coriolis, std::sqrt(sq));
    }
    grav = grav.cwiseMax(gravity_vector(params, q).cwiseAbs());
  });
  return {lambda_min / kBoundMargin, lambda_max * kBoundMargin, coriolis * kBoundMargin,
          grav * kBoundMargin};
}

}  // namespace ftteleop
