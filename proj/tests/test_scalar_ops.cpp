#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "ftteleop/scalar_ops.hpp"

using namespace ftteleop;

TEST_CASE("signed_pow reference values") {
  CHECK(signed_pow(0.0, 0.5) == 0.0);
  CHECK(signed_pow(-4.0, 0.5) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(signed_pow(2.0, 1.0 / 3.0) == doctest::Approx(std::cbrt(2.0)).epsilon(1e-15));
  CHECK(signed_pow(-3.0, 1.0) == -3.0);
}

TEST_CASE("signed_pow rejects bad input") {
  CHECK_THROWS_AS(signed_pow(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(signed_pow(1.0, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(signed_pow(std::nan(""), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(signed_pow(INFINITY, 0.5), std::invalid_argument);
}

TEST_CASE("sat_pow reference values") {
  CHECK(sat_pow(0.5, 1.0, 1.0) == 0.5);
  CHECK(sat_pow(2.0, 1.0, 1.0) == 1.0);
  CHECK(sat_pow(-3.0, 0.5, 2.0) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  // boundary belongs to the saturated branch, both branches agree there
  CHECK(sat_pow(2.0, 0.5, 2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(sat_pow(1.0, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("s_integral reference values") {
  CHECK(s_integral(0.5, 1.0, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(s_integral(2.0, 1.0, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(s_integral(0.0, 0.3, 0.7) == 0.0);
  CHECK(s_integral(-2.0, 1.0, 1.0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("dilate reference values") {
  Vector w(2), x(2);
  x << 1, 1;
  w << 1.5, 1;
  CHECK(dilate(x, w, 1.0) == x);
  x << 2, 3;
  w << 1, 1;
  Vector d = dilate(x, w, 0.5);
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 1.5);
  x << 1, 1;
  w << 2, 1;
  d = dilate(x, w, 0.5);
  CHECK(d[0] == 0.25);
  CHECK(d[1] == 0.5);
  CHECK_THROWS_AS(dilate(x, Vector::Ones(3), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(dilate(x, w, 0.0), std::invalid_argument);
}

TEST_CASE("oddness") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-10, 10), up(0.05, 3), ud(0.01, 5);
  for (int i = 0; i < 2000; ++i) {
    const double x = ux(rng), p = up(rng), d = ud(rng);
    CHECK(signed_pow(-x, p) == -signed_pow(x, p));
    CHECK(sat_pow(-x, p, d) == -sat_pow(x, p, d));
  }
}

TEST_CASE("saturation commutes with the signed power") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ux(-10, 10), up(0.05, 3), ud(0.01, 5);
  for (int i = 0; i < 10000; ++i) {
    const double x = ux(rng), p = up(rng), d = ud(rng);
    CHECK(signed_pow(sat_clip(x, d), p) == sat_pow(x, p, d));
  }
}

TEST_CASE("s_integral derivative is sat_pow") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ux(-5, 5), up(0.2, 2), ud(0.1, 3);
  int checked = 0;
  while (checked < 2000) {
    const double x = ux(rng), p = up(rng), d = ud(rng);
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    if (std::abs(std::abs(x) - d) < 10 * h || std::abs(x) < 1e-2) continue;
    const double fd = (s_integral(x + h, d, p) - s_integral(x - h, d, p)) / (2 * h);
    const double exact = sat_pow(x, p, d);
    CHECK(std::abs(fd - exact) <= 1e-6 * std::abs(exact));
    ++checked;
  }
}

TEST_CASE("s_integral lower bound outside the saturation level") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> up(0.1, 3), ud(0.01, 3), uk(1.0, 20.0);
  for (int i = 0; i < 5000; ++i) {
    const double p = up(rng), d = ud(rng), x = d * uk(rng) * (i % 2 ? 1 : -1);
    CHECK(s_integral(x, d, p) >= std::pow(d, p) * std::abs(x) / (p + 1.0));
  }
}

TEST_CASE("signed_pow is homogeneous") {
  for (double eps : {0.5, 0.25, 0.125}) {
    for (double a : {1.0, 2.0, 0.5}) {
      const double x = -0.75, p = 0.5;
      CHECK(signed_pow(std::pow(eps, a) * x, p) ==
            doctest::Approx(std::pow(eps, a * p) * signed_pow(x, p)).epsilon(1e-15));
    }
  }
}

TEST_CASE("weights classify the regime") {
  CHECK(Weights{1.5, 1.0}.finite_time());
  CHECK(Weights{1.5, 1.0}.degree() == -0.5);
  CHECK(Weights{1.0, 1.0}.asymptotic());
  CHECK_FALSE(Weights{2.0, 1.0}.finite_time());
}
