#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hppmx::basis {

/// Clamped knot vector on [0, 1]: `degree + 1` copies of each boundary and
/// `inner_count` equally spaced interior knots.
struct KnotSet {
  int inner_count = 0;
  int degree = 3;
  std::vector<double> knots;

  /// Number of basis functions, inner_count + degree + 1.
  int dimension() const { return inner_count + degree + 1; }
};

KnotSet make_knots(int inner_count, int degree);

/// Rows are evaluation points, columns are basis functions.
using BasisMatrix = Eigen::MatrixXd;

/// Cox-de Boor evaluation of every basis function at every z.
/// Throws std::domain_error for z outside [0, 1].
BasisMatrix bspline_basis(std::span<const double> z, const KnotSet& knots);

/// Fills `out` (length dimension()) with the basis values at a single z and
/// returns the index of the first possibly non-zero function; at most
/// degree + 1 consecutive entries starting there are non-zero.
int basis_row(double z, const KnotSet& knots, std::span<double> out);

/// Career-percentile time points t / n for t = 1..observed.
/// `n` is the (possibly imputed, possibly fractional) total game count.
std::vector<double> aligned_times(double n, int observed);

/// Basis matrix on aligned times. Columns whose support lies entirely above
/// the last observed time are identically zero.
BasisMatrix design_matrix(std::span<const double> times, const KnotSet& knots);

/// Precision matrix K (up to the 1/tau^2 factor) of the order-`order` Gaussian
/// random walk whose first `order` coordinates are anchored by independent
/// N(0, tau^2 / v^2) priors.
Eigen::MatrixXd penalty_matrix(int dimension, int order, double v);

}  // namespace hppmx::basis
