#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace hppmx {

/// Seeded random source. Every draw in the library flows through one of
/// these, so a fixed seed reproduces a run bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  /// Independent substream derived from (seed, stream).
  Rng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Gamma with the given shape and rate.
  double gamma(double shape, double rate);
  /// Inverse gamma with density proportional to x^{-shape-1} exp(-rate / x).
  double inv_gamma(double shape, double rate) { return rate / gamma(shape, 1.0); }
  double exponential(double rate) { return -std::log(uniform()) / rate; }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  /// Index drawn with probability proportional to exp(log_weights).
  int categorical_log(std::span<const double> log_weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Draw from N(mean, sd^2) truncated to [lower, infinity). Inverse CDF in the
/// body, exponential rejection (Robert 1995) in the far tail. A lower bound of
/// -infinity gives an untruncated draw.
double truncated_normal_lower(Rng& rng, double mean, double sd, double lower);

/// Mean and precision of a Gaussian full conditional.
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  Eigen::LLT<Eigen::MatrixXd> factor;  // of precision
};

/// Solve for the mean of N(Q^{-1} b, Q^{-1}). Throws NumericalError if Q is
/// not positive definite.
GaussianConditional gaussian_from_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& shift);

/// x ~ N(mean, precision^{-1}).
Eigen::VectorXd draw_gaussian(Rng& rng, const GaussianConditional& g);

/// Standard normal vector of the given length.
Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n);

}  // namespace hppmx
