#pragma once

#include <cmath>

namespace hppmx::math {

inline constexpr double kLog2Pi = 1.8378770664093453;

/// Log-gamma without touching the global `signgam` (safe across threads).
/// Only used for positive arguments.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// log(1 - Phi(x)), accurate far into the upper tail.
double log_normal_sf(double x);

/// Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

/// Upper-tail quantile: x with 1 - Phi(x) = q, accurate for tiny q.
double normal_upper_quantile(double q);

/// Log density of the inverse gamma with the given shape and rate,
/// p(x) = rate^shape / Gamma(shape) x^{-shape-1} exp(-rate / x).
inline double log_inv_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - log_gamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

}  // namespace hppmx::math
