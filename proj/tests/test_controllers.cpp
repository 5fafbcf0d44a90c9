#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "ftteleop/controllers.hpp"

using namespace ftteleop;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

RobotParams arm(double gravity = 9.81, std::optional<Vector> limits = std::nullopt) {
  return RobotParams(vec({1.8, 1.6}), vec({0.8, 0.6}), vec({0.4, 0.3}), vec({0.096, 0.048}),
                     gravity, limits);
}

ControllerConfig make(Variant v, double ks = 6, double d = 8, double kc = 10, double dc = 8) {
  ControllerConfig c;
  c.variant = v;
  c.weights = {1.5, 1.0};
  c.ks = Vector::Constant(2, ks);
  c.local = {Vector::Constant(2, d), Vector::Constant(2, kc), Vector::Constant(2, dc)};
  c.remote = c.local;
  c.delta_u = 0.5;
  c.delta_f = 0.5;
  return c;
}

RobotState rest(const Vector& q) { return {q, Vector::Zero(q.size())}; }

}  // namespace

TEST_CASE("exponents from the weights") {
  const Exponents e = derive_exponents({1.5, 1.0});
  CHECK(e.p_u == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(e.p_f == 0.5);
  const Exponents lin = derive_exponents({1.0, 1.0});
  CHECK(lin.p_u == 1.0);
  CHECK(lin.p_f == 1.0);
  CHECK_THROWS_WITH_AS(derive_exponents({2.0, 1.0}), doctest::Contains("2*r2 > r1"),
                       std::invalid_argument);
  CHECK_THROWS_AS(derive_exponents({0.8, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(derive_exponents({-1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("variant names") {
  for (Variant v : {Variant::C1, Variant::C2, Variant::C3, Variant::C4})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("C5"), std::invalid_argument);
}

TEST_CASE("gravity compensation at consensus rest") {
  const RobotParams p = arm();
  const Vector q = vec({0.4, -1.2});
  for (Variant v : {Variant::C1, Variant::C2, Variant::C3, Variant::C4}) {
    const ControllerConfig c = make(v);
    const auto out = control(c, p, p, rest(q), rest(q), initial_controller_state(c, q, q));
    CHECK(out.tau_l == gravity_vector(p, q));
    CHECK(out.tau_r == gravity_vector(p, q));
    if (has_virtual_state(v)) {
      CHECK(out.theta_dot_l.isZero(0.0));
      CHECK(out.theta_dot_r.isZero(0.0));
    } else {
      CHECK(out.theta_dot_l.size() == 0);
    }
  }
}

TEST_CASE("C1 reference torques") {
  const RobotParams p = arm(0.0);
  const ControllerConfig c = make(Variant::C1);
  auto tau = c1_torques(c, p, p, rest(vec({1, 0})), rest(vec({0, 0})));
  CHECK(tau.tau_l[0] == doctest::Approx(-6.0).epsilon(1e-15));
  CHECK(tau.tau_l[1] == 0.0);
  CHECK(tau.tau_r[0] == doctest::Approx(6.0).epsilon(1e-15));
  tau = c1_torques(c, p, p, rest(vec({0.008, 0})), rest(vec({0, 0})));
  CHECK(tau.tau_l[0] == doctest::Approx(-1.2).epsilon(1e-12));
  // damping term
  tau = c1_torques(c, p, p, {vec({0, 0}), vec({0.25, -4})}, rest(vec({0, 0})));
  CHECK(tau.tau_l[0] == doctest::Approx(-8 * 0.5).epsilon(1e-15));
  CHECK(tau.tau_l[1] == doctest::Approx(8 * 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(c1_torques(make(Variant::C3), p, p, rest(vec({0, 0})), rest(vec({0, 0}))),
                  std::invalid_argument);
}

TEST_CASE("C2 virtual-state rate") {
  const RobotParams p = arm(0.0);
  ControllerConfig c = make(Variant::C2, 6, 8, 1, 1);
  const ControllerState s{vec({1, 0}), vec({0, 0})};
  const auto out = c2_torques_and_theta_dot(c, p, p, rest(vec({0, 0})), rest(vec({0, 0})), s);
  CHECK(out.theta_dot_l[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(out.theta_dot_l[1] == 0.0);
  // the robot is pulled toward its virtual state
  CHECK(out.tau_l[0] == doctest::Approx(1.0).epsilon(1e-15));

  c = make(Variant::C2, 6, 8, 12, 3);
  const ControllerState s2{vec({0.2, -0.05}), vec({0, 0})};
  const Vector rate = theta_rate(c, Side::Local, vec({0, 0}), s2.theta_l);
  for (int k = 0; k < 2; ++k)
    CHECK(rate[k] == doctest::Approx(-16.0 * signed_pow(s2.theta_l[k], 2.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("C3 saturated proportional term") {
  const RobotParams p = arm(0.0);
  ControllerConfig c = make(Variant::C3, 1, 1);
  c.delta_u = 0.2;
  const auto tau = c3_torques(c, p, p, rest(vec({8, 0})), rest(vec({0, 0})));
  // the cap acts on the magnitude: |e| = 8 >= 0.2 gives 0.2^(1/3)
  CHECK(tau.tau_l[0] == doctest::Approx(-std::cbrt(0.2)).epsilon(1e-15));
}

TEST_CASE("saturated torques respect the cap budget") {
  const RobotParams p = arm();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-20, 20);
  for (Variant v : {Variant::C3, Variant::C4}) {
    const ControllerConfig c = make(v);
    const double bound = 6 * std::cbrt(0.5) + (v == Variant::C3 ? 8 * std::sqrt(0.5)
                                                                 : 10 * std::cbrt(0.5));
    for (int i = 0; i < 1000; ++i) {
      const RobotState l{vec({u(rng), u(rng)}), vec({u(rng), u(rng)})};
      const RobotState r{vec({u(rng), u(rng)}), vec({u(rng), u(rng)})};
      const ControllerState s{vec({u(rng), u(rng)}), vec({u(rng), u(rng)})};
      const auto out = control(c, p, p, l, r, s);
      CHECK(((out.tau_l - gravity_vector(p, l.q)).cwiseAbs().array() <= bound + 1e-12).all());
      CHECK(((out.tau_r - gravity_vector(p, r.q)).cwiseAbs().array() <= bound + 1e-12).all());
    }
  }
}

TEST_CASE("proportional action is antisymmetric") {
  const RobotParams p = arm(0.0);
  for (Variant v : {Variant::C1, Variant::C3}) {
    const ControllerConfig c = make(v);
    const auto out = control(c, p, p, rest(vec({0.3, -0.7})), rest(vec({-0.1, 0.2})), {});
    CHECK((out.tau_l + out.tau_r).norm() < 1e-15);
  }
}

// Largest torque jump between neighbours of a sweep that moves e, qdot and the
// virtual error by `h` per step around `center`.
static double sweep_jump(const ControllerConfig& c, const RobotParams& p, double center, double h) {
  double worst = 0.0;
  Vector prev;
  for (int i = -1000; i <= 1000; ++i) {
    const double s = center + i * h;
    const RobotState l{vec({s, -0.4}), vec({s, 0.1})};
    const RobotState r{vec({0, -0.4}), vec({0, 0})};
    const ControllerState cs = has_virtual_state(c.variant)
                                   ? ControllerState{vec({2 * s, -0.4}), vec({0, -0.4})}
                                   : ControllerState{};
    const Vector tau = control(c, p, p, l, r, cs).tau_l;
    if (prev.size() > 0) worst = std::max(worst, (tau - prev).cwiseAbs().maxCoeff());
    prev = tau;
  }
  return worst;
}

TEST_CASE("torque laws are continuous") {
  const RobotParams p = arm();
  for (Variant v : {Variant::C1, Variant::C2, Variant::C3, Variant::C4}) {
    const ControllerConfig c = make(v);
    // Lipschitz around the saturation levels
    CHECK(sweep_jump(c, p, 0.5, 1e-6) < 1e-3);
    CHECK(sweep_jump(c, p, -0.5, 1e-6) < 1e-3);
    // Only Hoelder at the origin: jumps follow the modulus K h^p and vanish with h.
    auto modulus = [&](double h) {
      const double damping = has_virtual_state(v) ? 10 * std::cbrt(h) : 8 * std::sqrt(h);
      return 6 * std::cbrt(h) + damping + 50 * h;
    };
    double last = INFINITY;
    for (double h : {1e-6, 1e-9, 1e-12}) {
      const double jump = sweep_jump(c, p, 0.0, h);
      CHECK(jump <= modulus(h));
      CHECK(jump < 0.2 * last);
      last = jump;
    }
  }
}

TEST_CASE("coupling potential gradient is the proportional term") {
  const RobotParams p = arm(0.0);
  const ControllerConfig c = make(Variant::C1);
  const Vector ql = vec({0.3, -0.7}), qr = vec({-0.1, 0.2});
  const Vector tau = control(c, p, p, rest(ql), rest(qr), {}).tau_l;
  for (int k = 0; k < 2; ++k) {
    const double h = 1e-6;
    const Vector e = Vector::Unit(2, k) * h;
    const double grad =
        (desired_potential(c, ql + e, qr, {}) - desired_potential(c, ql - e, qr, {})) / (2 * h);
    CHECK(std::abs(-grad - tau[k]) <= 1e-6 * std::abs(tau[k]));
  }
}

TEST_CASE("desired potential") {
  const Vector q = vec({0.1, 0.2});
  for (Variant v : {Variant::C1, Variant::C2, Variant::C3, Variant::C4}) {
    const ControllerConfig c = make(v);
    CHECK(desired_potential(c, q, q, initial_controller_state(c, q, q)) == 0.0);
    CHECK(desired_potential(c, q, vec({0.3, 0}), initial_controller_state(c, q, q)) > 0.0);
  }
  const ControllerConfig c1 = make(Variant::C1);
  CHECK(desired_potential(c1, vec({1, 0}), vec({0, 0}), {}) ==
        doctest::Approx(6 * 0.75).epsilon(1e-15));
}

TEST_CASE("dissipation rate") {
  ControllerConfig c = make(Variant::C1);
  const RobotState l{vec({0, 0}), vec({4, -1})}, r{vec({0, 0}), vec({0, 0})};
  CHECK(dissipation_rate(c, l, r, {}) == doctest::Approx(-8 * (8 + 1)).epsilon(1e-15));
  c = make(Variant::C3);
  CHECK(dissipation_rate(c, l, r, {}) ==
        doctest::Approx(-8 * (4 * std::sqrt(0.5) + 1 * std::sqrt(0.5))).epsilon(1e-15));
  c = make(Variant::C2, 6, 8, 1, 1);
  const ControllerState s{vec({1, 0}), vec({0, 0})};
  CHECK(dissipation_rate(c, rest(vec({0, 0})), rest(vec({0, 0})), s) ==
        doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("configuration checks") {
  ControllerConfig c = make(Variant::C1);
  CHECK(check_config(c, 2).empty());
  c.ks = vec({6});
  c.local.ds = vec({-1, 8});
  c.weights = {2.0, 1.0};
  const auto errors = check_config(c, 2);
  CHECK(errors.size() == 3);
  CHECK_THROWS_AS(validate_config(c, 2), std::invalid_argument);
  c = make(Variant::C4);
  c.delta_f = 0.0;
  CHECK(check_config(c, 2).size() == 1);
}

TEST_CASE("saturation budget") {
  JointSaturationCheck j = check_joint_saturation(6, 1, 1, 1, 1.0 / 3, 0.5, 10, 2);
  CHECK(j.literal_budget == 7.0);
  CHECK(j.pass);
  j = check_joint_saturation(6, 3, 1, 1, 1.0 / 3, 0.5, 10, 2);
  CHECK(j.literal_budget == 9.0);
  CHECK_FALSE(j.pass);
  j = check_joint_saturation(15, 2, 0.2, 0.5, 1.0 / 3, 0.5, 20, 5);
  CHECK(j.literal_budget == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(j.cap_budget == doctest::Approx(15 * std::cbrt(0.2) + 2 * std::sqrt(0.5)).epsilon(1e-15));
  // gated by the larger, capped budget: 10.18 < 15
  CHECK(j.pass);

  const RobotParams free_arm = arm();
  CHECK(validate_saturation(make(Variant::C3), free_arm, free_arm).pass());
  CHECK(validate_saturation(make(Variant::C1), free_arm, free_arm).pass());

  const RobotParams limited = arm(9.81, vec({45, 25}));
  const SaturationReport ok = validate_saturation(make(Variant::C3), limited, limited);
  CHECK(ok.pass());
  CHECK(ok.joints.size() == 4);
  for (const auto& jc : ok.joints) CHECK(jc.margin() > 0.0);
  CHECK(validate_saturation(make(Variant::C4), limited, limited).pass());
  CHECK_FALSE(validate_saturation(make(Variant::C3, 30), limited, limited).pass());
  CHECK_FALSE(validate_saturation(make(Variant::C1), limited, limited).pass());
}
