#include "hppmx/random.hpp"

#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

#include "hppmx/errors.hpp"
#include "hppmx/math.hpp"
#include "hppmx/partition.hpp"

namespace hppmx {

namespace math {

double log_normal_sf(double x) {
  if (x < 30.0) return std::log(0.5 * std::erfc(x / std::sqrt(2.0)));
  // Mills ratio expansion.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * kLog2Pi - std::log(x) + std::log(series);
}

double normal_quantile(double p) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double normal_upper_quantile(double q) {
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q);
}

}  // namespace math

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double Rng::uniform() {
  // 53 random bits shifted to the centre of their cell, never 0 or 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::gamma(double shape, double rate) {
  std::gamma_distribution<double> g(shape, 1.0);
  return g(engine_) / rate;
}

int Rng::uniform_int(int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(engine_);
}

int Rng::categorical_log(std::span<const double> log_weights) {
  const double total = log_sum_exp(log_weights);
  double u = uniform();
  const int n = static_cast<int>(log_weights.size());
  for (int j = 0; j < n; ++j) {
    u -= std::exp(log_weights[j] - total);
    if (u <= 0.0) return j;
  }
  // Rounding left a sliver of mass: return the last index with positive weight.
  for (int j = n - 1; j >= 0; --j) {
    if (std::isfinite(log_weights[j])) return j;
  }
  return n - 1;
}

double truncated_normal_lower(Rng& rng, double mean, double sd, double lower) {
  if (!std::isfinite(lower)) return rng.normal(mean, sd);
  const double a = (lower - mean) / sd;
  double x;
  if (a < 2.0) {
    const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
    x = math::normal_upper_quantile(rng.uniform() * tail);
    if (x < a) x = a;
  } else {
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double z = a + rng.exponential(rate);
      const double d = z - rate;
      if (rng.uniform() <= std::exp(-0.5 * d * d)) {
        x = z;
        break;
      }
    }
  }
  return std::max(lower, mean + sd * x);
}

GaussianConditional gaussian_from_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& shift) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Gaussian full conditional has a precision matrix that is not positive definite");
  }
  Eigen::VectorXd mean = llt.solve(shift);
  return {std::move(mean), precision, std::move(llt)};
}

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index j = 0; j < n; ++j) z(j) = rng.normal();
  return z;
}

Eigen::VectorXd draw_gaussian(Rng& rng, const GaussianConditional& g) {
  const Eigen::VectorXd z = standard_normal_vector(rng, g.mean.size());
  // Q = L L^T, so L^{-T} z has covariance Q^{-1}.
  return g.mean + g.factor.matrixU().solve(z);
}

}  // namespace hppmx
