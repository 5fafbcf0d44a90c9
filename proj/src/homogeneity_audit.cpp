#include "ftteleop/homogeneity_audit.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace ftteleop {

namespace {

struct Unpacked {
  Vector qt_l, qt_r, qd_l, qd_r, tht_l, tht_r;
};

Unpacked unpack(const ControllerConfig& config, int n, const Vector& x) {
  if (x.size() != closed_loop_dimension(config, n)) {
    throw std::invalid_argument(fmt::format("closed-loop state has {} entries, expected {}",
                                            x.size(), closed_loop_dimension(config, n)));
  }
  Unpacked u{x.segment(0, n), x.segment(n, n), x.segment(2 * n, n), x.segment(3 * n, n), {},
             {}};
  if (has_virtual_state(config.variant)) {
    u.tht_l = x.segment(4 * n, n);
    u.tht_r = x.segment(5 * n, n);
  }
  return u;
}

Vector pack(const Vector& a, const Vector& b, const Vector& c, const Vector& d,
            const Vector& e, const Vector& f) {
  Vector x(a.size() + b.size() + c.size() + d.size() + e.size() + f.size());
  x << a, b, c, d, e, f;
  return x;
}

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  for (int c = 2; static_cast<int>(primes.size()) < count; ++c) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

}  // namespace

int closed_loop_dimension(const ControllerConfig& config, int dof) {
  return (has_virtual_state(config.variant) ? 6 : 4) * dof;
}

HomogeneitySpec make_homogeneity_spec(const ControllerConfig& config, int dof,
                                      int sphere_samples, std::uint64_t seed, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("epsilon grid needs at least two points");
  HomogeneitySpec spec;
  const double r1 = config.weights.r1;
  const double r2 = config.weights.r2;
  spec.weights = Vector(closed_loop_dimension(config, dof));
  spec.weights.segment(0, 2 * dof).setConstant(r1);
  spec.weights.segment(2 * dof, 2 * dof).setConstant(r2);
  if (has_virtual_state(config.variant)) spec.weights.segment(4 * dof, 2 * dof).setConstant(r1);
  spec.degree = r2 - r1;
  spec.sphere_samples = sphere_samples;
  spec.seed = seed;
  for (int k = 0; k < grid_points; ++k) {
    spec.epsilons.push_back(std::pow(10.0, -3.0 * k / (grid_points - 1)));
  }
  return spec;
}

Vector homogeneous_part(const ControllerConfig& config, const RobotParams& params_l,
                        const RobotParams& params_r, const Vector& q_c, const Vector& x) {
  const int n = params_l.dof();
  const auto [p_u, p_f] = config.exponents();
  const Unpacked u = unpack(config, n, x);
  const Vector e = u.qt_l - u.qt_r;
  Vector acc_l, acc_r, dth_l, dth_r;
  if (has_virtual_state(config.variant)) {
    const Vector& kc_l = config.local.kc;
    const Vector& kc_r = config.remote.kc;
    acc_l = -solve_inertia(params_l, q_c,
                           config.ks.cwiseProduct(signed_pow(e, p_u)) -
                               kc_l.cwiseProduct(signed_pow(u.tht_l, p_u)));
    acc_r = -solve_inertia(params_r, q_c,
                           config.ks.cwiseProduct(signed_pow(Vector(-e), p_u)) -
                               kc_r.cwiseProduct(signed_pow(u.tht_r, p_u)));
    const double a = config.weights.r2 / config.weights.r1;
    const Vector rate_l = (kc_l.array() / config.local.dc.array()).pow(1.0 / p_f).matrix();
    const Vector rate_r = (kc_r.array() / config.remote.dc.array()).pow(1.0 / p_f).matrix();
    dth_l = -rate_l.cwiseProduct(signed_pow(u.tht_l, a)) - u.qd_l;
    dth_r = -rate_r.cwiseProduct(signed_pow(u.tht_r, a)) - u.qd_r;
  } else {
    acc_l = -solve_inertia(params_l, q_c,
                           config.ks.cwiseProduct(signed_pow(e, p_u)) +
                               config.local.ds.cwiseProduct(signed_pow(u.qd_l, p_f)));
    acc_r = -solve_inertia(params_r, q_c,
                           config.ks.cwiseProduct(signed_pow(Vector(-e), p_u)) +
                               config.remote.ds.cwiseProduct(signed_pow(u.qd_r, p_f)));
  }
  return pack(u.qd_l, u.qd_r, acc_l, acc_r, dth_l, dth_r);
}

Vector closed_loop_field(const ControllerConfig& config, const RobotParams& params_l,
                         const RobotParams& params_r, const Vector& q_c, const Vector& x) {
  const int n = params_l.dof();
  const Unpacked u = unpack(config, n, x);
  const RobotState sl{q_c + u.qt_l, u.qd_l};
  const RobotState sr{q_c + u.qt_r, u.qd_r};
  ControllerState ctrl;
  if (has_virtual_state(config.variant)) ctrl = {sl.q + u.tht_l, sr.q + u.tht_r};
  const TorquesAndRates out = control(config, params_l, params_r, sl, sr, ctrl);
  const Vector zero = Vector::Zero(n);
  const Vector acc_l = forward_dynamics(params_l, sl, out.tau_l, zero);
  const Vector acc_r = forward_dynamics(params_r, sr, out.tau_r, zero);
  Vector dth_l, dth_r;
  if (has_virtual_state(config.variant)) {
    dth_l = out.theta_dot_l - u.qd_l;
    dth_r = out.theta_dot_r - u.qd_r;
  }
  return pack(u.qd_l, u.qd_r, acc_l, acc_r, dth_l, dth_r);
}

std::vector<Vector> sphere_samples(int dim, int count, std::uint64_t seed) {
  if (dim < 1 || count < 1) throw std::invalid_argument("sphere_samples: dim, count >= 1");
  const int pairs = (dim + 1) / 2;
  const auto primes = first_primes(2 * pairs);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> shift(primes.size());
  for (auto& s : shift) s = unif(rng);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::uint64_t i = 1; static_cast<int>(out.size()) < count; ++i) {
    Vector x(2 * pairs);
    for (int k = 0; k < pairs; ++k) {
      double u1 = std::fmod(radical_inverse(i, primes[2 * k]) + shift[2 * k], 1.0);
      const double u2 = std::fmod(radical_inverse(i, primes[2 * k + 1]) + shift[2 * k + 1], 1.0);
      u1 = std::max(u1, 1e-300);
      const double r = std::sqrt(-2.0 * std::log(u1));
      x[2 * k] = r * std::cos(2.0 * std::numbers::pi * u2);
      x[2 * k + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    const Vector v = x.head(dim);
    const double norm = v.norm();
    if (norm > 1e-12) out.push_back(v / norm);
  }
  return out;
}

double check_degree(const Field& field, const HomogeneitySpec& spec,
                    const std::vector<Vector>& points) {
  double worst = 0.0;
  for (const Vector& x : points) {
    const Vector fx = field(x);
    for (double eps : spec.epsilons) {
      const Vector fd = field(dilate(x, spec.weights, eps));
      for (Eigen::Index j = 0; j < fx.size(); ++j) {
        const double scale = std::pow(eps, spec.degree + spec.weights[j]);
        const double defect = std::abs(fd[j] / scale - fx[j]) / (std::abs(fx[j]) + 1e-12);
        worst = std::max(worst, defect);
      }
    }
  }
  return worst;
}

std::vector<SweepRow> vanishing_sweep(const ControllerConfig& config,
                                      const RobotParams& params_l,
                                      const RobotParams& params_r, const Vector& q_c,
                                      const HomogeneitySpec& spec) {
  const int dim = static_cast<int>(spec.weights.size());
  if (dim != closed_loop_dimension(config, params_l.dof())) {
    throw std::invalid_argument("homogeneity spec does not match the controller");
  }
  const auto points = sphere_samples(dim, spec.sphere_samples, spec.seed);
  std::vector<Vector> fh;
  fh.reserve(points.size());
  for (const Vector& x : points) fh.push_back(homogeneous_part(config, params_l, params_r, q_c, x));

  std::vector<SweepRow> rows;
  for (double eps : spec.epsilons) {
    SweepRow row{eps, 0.0, 0};
    const double lift = std::pow(eps, -spec.degree);
    for (std::size_t s = 0; s < points.size(); ++s) {
      Vector f;
      try {
        f = closed_loop_field(config, params_l, params_r, q_c,
                              dilate(points[s], spec.weights, eps));
      } catch (const std::runtime_error&) {
        ++row.nonfinite;
        continue;
      }
      const Vector undilated = dilate(f, -spec.weights, eps);
      const double dev = (lift * undilated - fh[s]).norm();
      if (!std::isfinite(dev)) {
        ++row.nonfinite;
        continue;
      }
      row.deviation = std::max(row.deviation, dev);
    }
    rows.push_back(row);
  }
  return rows;
}

double loglog_slope(const std::vector<SweepRow>& rows, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& r : rows) {
    if (r.epsilon < lo * (1 - 1e-12) || r.epsilon > hi * (1 + 1e-12) || !(r.deviation > 0.0)) {
      continue;
    }
    const double x = std::log(r.epsilon);
    const double y = std::log(r.deviation);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw std::invalid_argument("loglog_slope needs at least two rows in range");
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "epsilon,deviation,nonfinite\n";
  for (const auto& r : rows) out << fmt::format("{:.17g},{:.17g},{}\n", r.epsilon, r.deviation, r.nonfinite);
}

}  // namespace ftteleop
