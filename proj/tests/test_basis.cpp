#include <doctest.h>

#include <cmath>
#include <vector>

#include "hppmx/basis.hpp"
#include "hppmx/math.hpp"
#include "hppmx/random.hpp"

using namespace hppmx;
using namespace hppmx::basis;

TEST_CASE("cubic basis row at z = 0.37 with five inner knots") {
  const KnotSet k = make_knots(5, 3);
  REQUIRE(k.dimension() == 9);
  const std::vector<double> z{0.37};
  const BasisMatrix H = bspline_basis(z, k);
  const double expected[9] = {0, 0, 0.07909199999999998, 0.6235906666666665, 0.2955426666666667,
                              0.0017746666666666687, 0, 0, 0};
  for (int j = 0; j < 9; ++j) CHECK(H(0, j) == doctest::Approx(expected[j]).epsilon(1e-13));
}

TEST_CASE("degree zero with one inner knot is an indicator basis") {
  const KnotSet k = make_knots(1, 0);
  const std::vector<double> z{0.25, 0.75, 1.0};
  const BasisMatrix H = bspline_basis(z, k);
  CHECK(H(0, 0) == 1.0);
  CHECK(H(0, 1) == 0.0);
  CHECK(H(1, 1) == 1.0);
  CHECK(H(2, 1) == 1.0);
}

TEST_CASE("partition of unity and local support over random knot sets") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const int q = rng.uniform_int(0, 4);
    const int p = rng.uniform_int(0, 30);
    const KnotSet k = make_knots(p, q);
    std::vector<double> z(25);
    for (double& v : z) v = rng.uniform();
    z[0] = 0.0;
    z[1] = 1.0;
    const BasisMatrix H = bspline_basis(z, k);
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
      CHECK(std::abs(H.row(r).sum() - 1.0) <= 1e-12);
      int nz = 0, first = -1, last = -1;
      for (int j = 0; j < k.dimension(); ++j) {
        CHECK(H(r, j) >= 0.0);
        if (H(r, j) != 0.0) {
          ++nz;
          if (first < 0) first = j;
          last = j;
        }
      }
      CHECK(nz <= q + 1);
      CHECK(last - first + 1 <= q + 1);
    }
  }
}

TEST_CASE("basis_row agrees with the matrix evaluation") {
  const KnotSet k = make_knots(7, 3);
  std::vector<double> row(k.dimension());
  for (double z : {0.0, 0.1, 0.5, 0.999, 1.0}) {
    const int first = basis_row(z, k, row);
    const std::vector<double> zz{z};
    const BasisMatrix H = bspline_basis(zz, k);
    for (int j = 0; j < k.dimension(); ++j) {
      CHECK(row[j] == doctest::Approx(H(0, j)).epsilon(1e-15));
      if (j < first || j > first + 3) CHECK(row[j] == 0.0);
    }
  }
}

TEST_CASE("evaluation outside the unit interval is a domain error") {
  const KnotSet k = make_knots(3, 3);
  const std::vector<double> bad{1.5};
  CHECK_THROWS_AS(bspline_basis(bad, k), std::domain_error);
  const std::vector<double> neg{-0.01};
  CHECK_THROWS_AS(bspline_basis(neg, k), std::domain_error);
}

TEST_CASE("aligned times") {
  CHECK(aligned_times(4, 4) == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(aligned_times(8, 4) == std::vector<double>{0.125, 0.25, 0.375, 0.5});
  const auto z = aligned_times(1383, 1383);
  CHECK(z.back() == 1.0);
  CHECK(z.size() == 1383);
}

TEST_CASE("design matrix of a retired subject has no zero column") {
  const KnotSet k = make_knots(15, 3);
  const auto z = aligned_times(200, 200);
  const BasisMatrix H = design_matrix(z, k);
  for (int j = 0; j < k.dimension(); ++j) CHECK(H.col(j).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("half-observed career leaves the late columns empty") {
  const KnotSet k = make_knots(15, 3);
  const auto z = aligned_times(400, 200);
  REQUIRE(z.back() == 0.5);
  const BasisMatrix H = design_matrix(z, k);
  // Knots at j / 16; column j is supported on [t_j, t_{j+4}) with t_j = (j - 3) / 16.
  for (int j = 0; j < k.dimension(); ++j) {
    const bool empty = H.col(j).cwiseAbs().maxCoeff() == 0.0;
    CHECK(empty == (j >= 11));
  }
}

TEST_CASE("single observation at z = 0 with degree zero") {
  const KnotSet k = make_knots(4, 0);
  const std::vector<double> z{0.0};
  const BasisMatrix H = bspline_basis(z, k);
  CHECK((H.array() != 0.0).count() == 1);
}

TEST_CASE("first-order penalty for three coefficients") {
  const Eigen::MatrixXd K = penalty_matrix(3, 1, 1.0);
  Eigen::Matrix3d expected;
  expected << 2, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((K - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(penalty_matrix(6, 1, 50.0)(0, 0) == doctest::Approx(2501.0));
}

namespace {

// Sequential random-walk density: anchors N(0, tau2 / v^2), then order-d
// differences N(0, tau2).
double sequential_log_density(const Eigen::VectorXd& x, int d, double v, double tau2) {
  double lp = 0.0;
  for (int j = 0; j < d; ++j) lp += math::log_normal_pdf(x[j], 0.0, tau2 / (v * v));
  Eigen::VectorXd diff = x;
  for (int r = 0; r < d; ++r) {
    Eigen::VectorXd next(diff.size() - 1);
    for (Eigen::Index j = 0; j + 1 < diff.size(); ++j) next[j] = diff[j + 1] - diff[j];
    diff = next;
  }
  for (Eigen::Index j = 0; j < diff.size(); ++j) lp += math::log_normal_pdf(diff[j], 0.0, tau2);
  return lp;
}

double penalty_log_density(const Eigen::MatrixXd& K, const Eigen::VectorXd& x, double tau2) {
  const Eigen::Index P = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < P; ++j) logdet += 2.0 * std::log(llt.matrixL()(j, j));
  return -0.5 * P * (math::kLog2Pi + std::log(tau2)) + 0.5 * logdet - 0.5 * x.dot(K * x) / tau2;
}

}  // namespace

TEST_CASE("penalty density equals the sequential random-walk density") {
  Rng rng(5);
  for (int rep = 0; rep < 300; ++rep) {
    const int d = rng.uniform_int(1, 2);
    const int P = rng.uniform_int(d + 1, 25);
    const double v = 0.2 + 3.0 * rng.uniform();
    const double tau2 = 0.05 + 2.0 * rng.uniform();
    const Eigen::MatrixXd K = penalty_matrix(P, d, v);
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd x = standard_normal_vector(rng, P) * 2.0;
    CHECK(std::abs(penalty_log_density(K, x, tau2) - sequential_log_density(x, d, v, tau2)) <= 1e-8);
  }
}

TEST_CASE("P = 5, second order: both densities agree at random points") {
  Rng rng(9);
  const Eigen::MatrixXd K = penalty_matrix(5, 2, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::VectorXd x = standard_normal_vector(rng, 5);
    CHECK(std::abs(penalty_log_density(K, x, 1.0) - sequential_log_density(x, 2, 1.0, 1.0)) <= 1e-10);
  }
}
