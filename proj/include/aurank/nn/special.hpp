#pragma once

#include <cmath>
#include <numbers>

#include "aurank/error.hpp"

namespace aurank::nn {

// Gauss error function. Backed by the C library's erf, which is accurate to
// a few ulp (well inside the 1.5e-7 absolute budget the losses need).
inline double erf(double x) {
  if (!std::isfinite(x)) throw InvalidInputError("erf argument is not finite");
  return std::erf(x);
}

// d/dx erf(x) = 2/sqrt(pi) * exp(-x^2)
inline double erf_derivative(double x) {
  return std::numbers::inv_sqrtpi * 2.0 * std::exp(-x * x);
}

// 1/2 (1 + erf(z / sqrt 2)), evaluated through erfc so the lower tail keeps
// its relative precision instead of cancelling to zero.
inline double normal_cdf(double z) {
  if (!std::isfinite(z)) throw InvalidInputError("normal_cdf argument is not finite");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
}

// log(1 + e^x) without overflow for large x.
inline double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace aurank::nn
