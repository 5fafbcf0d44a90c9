#include "ftteleop/scalar_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ftteleop {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite, got " +
                                std::to_string(v));
  }
}

}  // namespace

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

double signed_pow(double x, double p) {
  require_positive(p, "exponent p");
  if (!std::isfinite(x)) throw std::invalid_argument("signed_pow: non-finite argument");
  return std::pow(std::abs(x), p) * sign(x);
}

double sat_pow(double x, double p, double delta) {
  require_positive(p, "exponent p");
  require_positive(delta, "saturation level delta");
  if (std::abs(x) >= delta) return std::pow(delta, p) * sign(x);
  return signed_pow(x, p);
}

double sat_clip(double x, double delta) {
  require_positive(delta, "saturation level delta");
  if (std::abs(x) >= delta) return delta * sign(x);
  return x;
}

double s_integral(double x, double delta, double p) {
  require_positive(p, "exponent p");
  require_positive(delta, "saturation level delta");
  const double ax = std::abs(x);
  if (ax >= delta) return std::pow(delta, p) * ax - p * std::pow(delta, p + 1.0) / (p + 1.0);
  return std::pow(ax, p + 1.0) / (p + 1.0);
}

Vector signed_pow(const Vector& x, double p) {
  Vector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = signed_pow(x[j], p);
  return out;
}

Vector sat_pow(const Vector& x, double p, double delta) {
  Vector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = sat_pow(x[j], p, delta);
  return out;
}

Vector dilate(const Vector& x, const Vector& weights, double epsilon) {
  if (x.size() != weights.size()) {
    throw std::invalid_argument("dilate: state has " + std::to_string(x.size()) +
                                " entries but " + std::to_string(weights.size()) + " weights");
  }
  require_positive(epsilon, "dilation epsilon");
  Vector out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = std::pow(epsilon, weights[j]) * x[j];
  return out;
}

}  // namespace ftteleop
