#include "hppmx/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hppmx::basis {

KnotSet make_knots(int inner_count, int degree) {
  if (inner_count < 0) throw std::invalid_argument("inner knot count must be non-negative");
  if (degree < 0) throw std::invalid_argument("spline degree must be non-negative");
  KnotSet ks;
  ks.inner_count = inner_count;
  ks.degree = degree;
  ks.knots.reserve(inner_count + 2 * (degree + 1));
  for (int i = 0; i <= degree; ++i) ks.knots.push_back(0.0);
  for (int j = 1; j <= inner_count; ++j) {
    ks.knots.push_back(static_cast<double>(j) / (inner_count + 1));
  }
  for (int i = 0; i <= degree; ++i) ks.knots.push_back(1.0);
  return ks;
}

namespace {

// Index s of the knot span with knots[s] <= z < knots[s+1]; the right
// boundary z = 1 belongs to the last non-degenerate span.
int find_span(double z, const KnotSet& ks) {
  const int q = ks.degree;
  const int last = ks.dimension() - 1;
  if (z >= 1.0) return last;
  int lo = q;
  int hi = last + 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (z < ks.knots[mid]) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo;
}

}  // namespace

int basis_row(double z, const KnotSet& ks, std::span<double> out) {
  if (!(z >= 0.0 && z <= 1.0)) {
    throw std::domain_error("basis evaluation point " + std::to_string(z) + " is outside [0, 1]");
  }
  const int q = ks.degree;
  const int P = ks.dimension();
  if (static_cast<int>(out.size()) != P) throw std::invalid_argument("basis row has the wrong length");
  std::fill(out.begin(), out.end(), 0.0);

  const int span = find_span(z, ks);
  const auto& t = ks.knots;
  // Triangular Cox-de Boor scheme for the q + 1 functions that are non-zero on
  // the span.
  std::vector<double> n(q + 1, 0.0), left(q + 1, 0.0), right(q + 1, 0.0);
  n[0] = 1.0;
  for (int j = 1; j <= q; ++j) {
    left[j] = z - t[span + 1 - j];
    right[j] = t[span + j] - z;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double tmp = denom > 0.0 ? n[r] / denom : 0.0;
      n[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    n[j] = saved;
  }
  const int first = span - q;
  for (int r = 0; r <= q; ++r) out[first + r] = n[r];
  return first;
}

BasisMatrix bspline_basis(std::span<const double> z, const KnotSet& ks) {
  const int P = ks.dimension();
  BasisMatrix H = BasisMatrix::Zero(static_cast<Eigen::Index>(z.size()), P);
  std::vector<double> row(P);
  for (std::size_t i = 0; i < z.size(); ++i) {
    basis_row(z[i], ks, row);
    for (int j = 0; j < P; ++j) H(static_cast<Eigen::Index>(i), j) = row[j];
  }
  return H;
}

std::vector<double> aligned_times(double n, int observed) {
  if (observed < 1) throw std::invalid_argument("at least one observed game is required");
  if (!(n >= observed)) {
    throw std::invalid_argument("observed games (" + std::to_string(observed) +
                                ") exceed total games (" + std::to_string(n) + ")");
  }
  std::vector<double> z(observed);
  for (int t = 1; t <= observed; ++t) z[t - 1] = static_cast<double>(t) / n;
  // Guard the retired case against t/n rounding above 1.
  if (z.back() > 1.0) z.back() = 1.0;
  return z;
}

BasisMatrix design_matrix(std::span<const double> times, const KnotSet& ks) {
  return bspline_basis(times, ks);
}

Eigen::MatrixXd penalty_matrix(int P, int d, double v) {
  if (d < 1) throw std::invalid_argument("random walk order must be at least 1");
  if (P <= d) {
    throw std::invalid_argument("basis dimension " + std::to_string(P) +
                                " must exceed the random walk order " + std::to_string(d));
  }
  if (!(v > 0.0)) throw std::invalid_argument("anchor precision v must be positive");

  // Row l of D holds the d-th difference coefficients (-1)^(d-k) C(d, k)
  // applied to theta_{l..l+d}.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(P - d, P);
  std::vector<double> coef(d + 1);
  for (int k = 0; k <= d; ++k) {
    double c = 1.0;
    for (int j = 1; j <= k; ++j) c = c * (d - j + 1) / j;
    coef[k] = ((d - k) % 2 == 0 ? 1.0 : -1.0) * c;
  }
  for (int l = 0; l < P - d; ++l) {
    for (int k = 0; k <= d; ++k) D(l, l + k) = coef[k];
  }
  Eigen::MatrixXd K = D.transpose() * D;
  for (int j = 0; j < d; ++j) K(j, j) += v * v;
  return K;
}

}  // namespace hppmx::basis
