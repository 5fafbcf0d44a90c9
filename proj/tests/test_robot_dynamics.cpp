#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "ftteleop/robot_dynamics.hpp"

using namespace ftteleop;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

RobotParams arm(double gravity = 9.81) {
  return RobotParams(vec({1.8, 1.6}), vec({0.8, 0.6}), vec({0.4, 0.3}), vec({0.096, 0.048}),
                     gravity);
}

// Hand-written planar two-link kinematics, independent of the library's Jacobians.
struct TwoLink {
  double m1 = 1.8, m2 = 1.6, l1 = 0.8, c1 = 0.4, c2 = 0.3, i1 = 0.096, i2 = 0.048, g = 9.81;

  Eigen::Vector4d com_positions(const Vector& q) const {
    Eigen::Vector4d p;
    p << c1 * std::cos(q[0]), c1 * std::sin(q[0]),
        l1 * std::cos(q[0]) + c2 * std::cos(q[0] + q[1]),
        l1 * std::sin(q[0]) + c2 * std::sin(q[0] + q[1]);
    return p;
  }

  // Kinetic energy from finite differences of the center-of-mass positions.
  double kinetic(const Vector& q, const Vector& qd) const {
    const double h = 1e-6;
    const Eigen::Vector4d v = (com_positions(q + h * qd) - com_positions(q - h * qd)) / (2 * h);
    const double w1 = qd[0], w2 = qd[0] + qd[1];
    return 0.5 * m1 * v.head<2>().squaredNorm() + 0.5 * m2 * v.tail<2>().squaredNorm() +
           0.5 * i1 * w1 * w1 + 0.5 * i2 * w2 * w2;
  }

  double potential(const Vector& q) const {
    const Eigen::Vector4d p = com_positions(q);
    return g * (m1 * p[1] + m2 * p[3]);
  }
};

Matrix numeric_mass_matrix(const TwoLink& oracle, const Vector& q) {
  const Vector e1 = vec({1, 0}), e2 = vec({0, 1});
  const double k1 = oracle.kinetic(q, e1), k2 = oracle.kinetic(q, e2);
  const double k12 = oracle.kinetic(q, e1 + e2);
  Matrix m(2, 2);
  m << 2 * k1, k12 - k1 - k2, k12 - k1 - k2, 2 * k2;
  return m;
}

Matrix mdot(const RobotParams& p, const Vector& q, const Vector& qd) {
  const auto dm = mass_matrix_gradient(p, q);
  Matrix out = Matrix::Zero(p.dof(), p.dof());
  for (int i = 0; i < p.dof(); ++i) out += dm[i] * qd[i];
  return out;
}

}  // namespace

TEST_CASE("mass matrix reference entries") {
  const RobotParams p = arm();
  CHECK(mass_matrix(p, vec({0.3, 0.0}))(0, 0) == doctest::Approx(2.368).epsilon(1e-12));
  CHECK(mass_matrix(p, vec({0.3, std::numbers::pi / 2}))(0, 1) ==
        doctest::Approx(0.192).epsilon(1e-12));
}

TEST_CASE("mass matrix matches the kinetic-energy oracle") {
  const RobotParams p = arm();
  const TwoLink oracle;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 50; ++i) {
    const Vector q = vec({u(rng), u(rng)});
    const Matrix m = mass_matrix(p, q);
    CHECK(m == m.transpose());
    CHECK((m - numeric_mass_matrix(oracle, q)).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("mass matrix gradient matches finite differences") {
  const RobotParams p = arm();
  const Vector q = vec({0.7, -1.1});
  const auto dm = mass_matrix_gradient(p, q);
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    const Vector e = Vector::Unit(2, i) * h;
    const Matrix fd = (mass_matrix(p, q + e) - mass_matrix(p, q - e)) / (2 * h);
    CHECK((dm[i] - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("Coriolis matrix") {
  const RobotParams p = arm();
  CHECK(coriolis_matrix(p, vec({1, -0.4}), vec({0, 0})).isZero(0.0));

  // Lagrangian residual at zero acceleration: C qd = Mdot qd - dK/dq.
  const Vector q = vec({1, -0.4}), qd = vec({1, 1});
  const double h = 1e-6;
  const Matrix md = (mass_matrix(p, q + h * qd) - mass_matrix(p, q - h * qd)) / (2 * h);
  Vector dkdq(2);
  for (int i = 0; i < 2; ++i) {
    const Vector e = Vector::Unit(2, i) * h;
    dkdq[i] = (0.5 * qd.dot(mass_matrix(p, q + e) * qd) - 0.5 * qd.dot(mass_matrix(p, q - e) * qd)) /
              (2 * h);
  }
  const Vector expected = md * qd - dkdq;
  CHECK((coriolis_matrix(p, q, qd) * qd - expected).norm() < 1e-8);
}

TEST_CASE("Mdot - 2C is skew-symmetric") {
  const RobotParams p = arm();
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const Vector q = vec({u(rng), u(rng)}), qd = vec({u(rng), u(rng)});
    const Matrix s = mdot(p, q, qd) - 2 * coriolis_matrix(p, q, qd);
    CHECK((s + s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gravity vector") {
  CHECK(gravity_vector(arm(0.0), vec({0.4, 1.0})).isZero(0.0));
  const RobotParams p = arm();
  CHECK(gravity_vector(p, vec({0, 0}))[0] ==
        doctest::Approx(9.81 * (1.8 * 0.4 + 1.6 * 0.8 + 1.6 * 0.3)).epsilon(1e-12));
  const TwoLink oracle;
  const Vector q = vec({0.9, -2.2});
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    const Vector e = Vector::Unit(2, i) * h;
    const double fd = (oracle.potential(q + e) - oracle.potential(q - e)) / (2 * h);
    CHECK(gravity_vector(p, q)[i] == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK(potential_energy(p, q) - potential_energy(p, vec({0, 0})) ==
        doctest::Approx(oracle.potential(q) - oracle.potential(vec({0, 0}))).epsilon(1e-12));
}

TEST_CASE("forward dynamics") {
  const RobotParams p = arm();
  const Vector q = vec({1, -0.4}), zero = Vector::Zero(2);
  CHECK(forward_dynamics(p, {q, zero}, gravity_vector(p, q), zero).norm() < 1e-12);
  CHECK(forward_dynamics(arm(0.0), {q, zero}, zero, zero).isZero(0.0));
  const Vector tau = vec({1, 0});
  const Vector expected = mass_matrix(p, q).inverse() * tau;
  const Vector qdd = forward_dynamics(arm(0.0), {q, zero}, tau, zero);
  CHECK((qdd - expected).norm() < 1e-12);

  // Residual of the full equation of motion.
  const Vector qd = vec({0.8, -1.7}), f = vec({0.3, -0.2}), t2 = vec({-2, 4});
  const Vector a = forward_dynamics(p, {q, qd}, t2, f);
  const Vector r = mass_matrix(p, q) * a + coriolis_matrix(p, q, qd) * qd + gravity_vector(p, q) -
                   t2 - f;
  CHECK(r.norm() < 1e-10);
  CHECK_THROWS_AS(forward_dynamics(p, {vec({1}), zero}, tau, zero), std::invalid_argument);
}

TEST_CASE("energies") {
  const RobotParams p = arm();
  CHECK(energies(p, {vec({0.2, -1}), vec({0, 0})}).kinetic == 0.0);
  CHECK(energies(p, {vec({0.2, 0}), vec({1, 0})}).kinetic == doctest::Approx(1.184).epsilon(1e-12));
}

TEST_CASE("energy is conserved by the unforced arm") {
  // Test-local RK4 on the passive arm; total energy drift must vanish with the step.
  const RobotParams p = arm();
  auto rhs = [&](const Vector& x) {
    Vector dx(4);
    dx << x.tail(2), forward_dynamics(p, {x.head(2), x.tail(2)}, Vector::Zero(2), Vector::Zero(2));
    return dx;
  };
  auto total = [&](const Vector& x) {
    const Energies e = energies(p, {x.head(2), x.tail(2)});
    return e.kinetic + e.potential;
  };
  Vector x(4);
  x << 1.0, -0.4, 0.5, -0.2;
  const double e0 = total(x), dt = 1e-3;
  double drift = 0.0;
  for (int k = 0; k < 3000; ++k) {
    const Vector k1 = rhs(x), k2 = rhs(x + 0.5 * dt * k1), k3 = rhs(x + 0.5 * dt * k2),
                 k4 = rhs(x + dt * k3);
    x += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    drift = std::max(drift, std::abs(total(x) - e0));
  }
  CHECK(drift < 1e-6);
}

TEST_CASE("derived bounds") {
  const RobotParams p = arm();
  const ModelBounds& b = p.bounds();
  CHECK(b.m2 >= 2.368);
  CHECK(b.m1 > 0.0);
  CHECK(arm(0.0).bounds().gravity.isZero(0.0));

  const double j = 2.0 * 0.5 * 0.5 + 0.1;
  const RobotParams pendulum(vec({2.0}), vec({1.0}), vec({0.5}), vec({0.1}), 9.81);
  CHECK(pendulum.bounds().m1 == doctest::Approx(j / 1.05).epsilon(1e-12));
  CHECK(pendulum.bounds().m2 == doctest::Approx(j * 1.05).epsilon(1e-12));
  CHECK(pendulum.bounds().coriolis == 0.0);
  CHECK(pendulum.bounds().gravity[0] >= 9.81 * 2.0 * 0.5);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 500; ++i) {
    const Vector q = vec({u(rng), u(rng)}), qd = vec({u(rng), u(rng)});
    Eigen::SelfAdjointEigenSolver<Matrix> es(mass_matrix(p, q));
    CHECK(es.eigenvalues().minCoeff() >= b.m1);
    CHECK(es.eigenvalues().maxCoeff() <= b.m2);
    CHECK((coriolis_matrix(p, q, qd) * qd).norm() <= b.coriolis * qd.squaredNorm());
    CHECK((gravity_vector(p, q).cwiseAbs().array() <= b.gravity.array()).all());
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(RobotParams(vec({1, 1}), vec({1}), vec({0.5, 0.5}), vec({0, 0}), 9.81),
                  std::invalid_argument);
  CHECK_THROWS_AS(RobotParams(vec({-1}), vec({1}), vec({0.5}), vec({0}), 9.81),
                  std::invalid_argument);
  CHECK_THROWS_AS(RobotParams(vec({1}), vec({1}), vec({0.5}), vec({0}), -1.0),
                  std::invalid_argument);
  // A point mass on a massless rod has zero inertia only in the degenerate com = 0 case.
  CHECK_THROWS_AS(RobotParams(vec({1}), vec({1}), vec({0.0}), vec({0}), 9.81),
                  std::invalid_argument);
  // Torque limit below the gravity bound.
  CHECK_THROWS_AS(RobotParams(vec({1.8, 1.6}), vec({0.8, 0.6}), vec({0.4, 0.3}),
                              vec({0.096, 0.048}), 9.81, vec({10, 20})),
                  std::invalid_argument);
  CHECK_NOTHROW(RobotParams(vec({1.8, 1.6}), vec({0.8, 0.6}), vec({0.4, 0.3}),
                            vec({0.096, 0.048}), 9.81, vec({45, 25})));
}
