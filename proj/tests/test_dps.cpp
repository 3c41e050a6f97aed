#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "vcsim/dps.hpp"

using namespace vcsim;

namespace {

// dense band-limited kernel, assembled straight from the defining integral
Eigen::MatrixXcd dense_kernel(int m, double nu1, double nu2) {
  Eigen::MatrixXcd k(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) k(i, j) = dps::band_kernel(nu1, nu2, i - j);
  return k;
}

}  // namespace

TEST_CASE("symmetric slepian basis", "[dps]") {
  const int m = 64, d = 16;
  const double w = 0.1;
  auto b = dps::make_basis(m, -w, w, d);
  REQUIRE(b.u.rows() == m);
  REQUIRE(b.u.cols() == d);
  CHECK(b.is_real());
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) CHECK(b.u(i, k).imag() == 0.0);

  SECTION("orthonormal columns") {
    Eigen::MatrixXcd g = b.u.adjoint() * b.u;
    CHECK((g - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("concentration spectrum has the expected cliff") {
    // time-bandwidth product 2MW = 12.8 -> near-unity eigenvalues up to ~12
    CHECK(b.lambda[0] >= 0.9999);
    CHECK(b.lambda[11] >= 0.85);
    CHECK(b.lambda[15] <= 0.3);
    for (int k = 0; k + 1 < d; ++k) CHECK(b.lambda[k] >= b.lambda[k + 1] - 1e-12);
    for (int k = 0; k < d; ++k) {
      CHECK(b.lambda[k] > 0.0);
      CHECK(b.lambda[k] < 1.0 + 1e-12);
    }
  }

  SECTION("columns are eigenvectors of the dense kernel") {
    Eigen::MatrixXcd kern = dense_kernel(m, -w, w);
    for (int k = 0; k < d; ++k) {
      Eigen::VectorXcd ku = kern * b.u.col(k);
      // quadratic form reproduces the reported concentration
      double lam = (b.u.col(k).adjoint() * ku)(0, 0).real();
      CHECK(lam == Catch::Approx(b.lambda[k]).margin(1e-8));
      // and the residual vanishes, so these really are kernel eigenvectors
      CHECK((ku - b.lambda[k] * b.u.col(k)).norm() < 1e-7);
    }
  }

  SECTION("leading taper is positive-sum and bell shaped") {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += b.u(i, 0).real();
    CHECK(s > 0.0);
    CHECK(b.u(m / 2, 0).real() > b.u(0, 0).real());
  }
}

TEST_CASE("asymmetric band is the modulated symmetric problem", "[dps]") {
  const int m = 64, d = 8;
  auto b = dps::make_basis(m, -0.2, 0.0, d);
  CHECK_FALSE(b.is_real());

  Eigen::MatrixXcd g = b.u.adjoint() * b.u;
  CHECK((g - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10);

  // eigenvalues match the half-width-0.1 symmetric case exactly
  auto sym = dps::make_basis(m, -0.1, 0.1, d);
  for (int k = 0; k < d; ++k) CHECK(b.lambda[k] == Catch::Approx(sym.lambda[k]).epsilon(1e-12));

  // demodulating by the band center recovers a real sequence
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < m; ++i) {
      cd v = b.u(i, k) * std::exp(cd(0.0, 2.0 * pi * 0.1 * static_cast<double>(i)));
      CHECK(std::abs(v.imag()) < 1e-12);
    }

  // still eigenvectors of the asymmetric dense kernel
  Eigen::MatrixXcd kern = dense_kernel(m, -0.2, 0.0);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXcd ku = kern * b.u.col(k);
    CHECK((ku - b.lambda[k] * b.u.col(k)).norm() < 1e-7);
  }
}

TEST_CASE("basis determinism and validation", "[dps]") {
  auto a = dps::make_basis(48, -0.05, 0.15, 6);
  auto b = dps::make_basis(48, -0.05, 0.15, 6);
  CHECK(a.u == b.u);
  CHECK(a.lambda == b.lambda);

  CHECK_THROWS_AS(dps::make_basis(1, -0.1, 0.1, 1), validation_error);
  CHECK_THROWS_AS(dps::make_basis(16, -0.1, 0.1, 17), validation_error);
  CHECK_THROWS_AS(dps::make_basis(16, -0.1, 0.1, 0), validation_error);
  CHECK_THROWS_AS(dps::make_basis(16, 0.1, 0.1, 4), validation_error);
  CHECK_THROWS_AS(dps::make_basis(16, 0.2, 0.1, 4), validation_error);
  CHECK_THROWS_AS(dps::make_basis(16, -0.6, 0.1, 4), validation_error);
  CHECK_THROWS_AS(dps::make_basis(16, -0.1, 0.6, 4), validation_error);
}

TEST_CASE("band kernel closed form", "[dps]") {
  // k = 0 is the bandwidth itself
  CHECK(dps::band_kernel(-0.1, 0.1, 0) == cd(0.2, 0.0));
  // symmetric band reduces to the sinc kernel
  for (long k = 1; k <= 5; ++k) {
    cd v = dps::band_kernel(-0.1, 0.1, k);
    CHECK(v.real() == Catch::Approx(std::sin(2.0 * pi * 0.1 * static_cast<double>(k)) /
                                    (pi * static_cast<double>(k)))
                          .margin(1e-14));
    CHECK(std::abs(v.imag()) < 1e-15);
  }
  // hermitian in the lag
  cd p = dps::band_kernel(-0.2, 0.0, 3);
  cd n = dps::band_kernel(-0.2, 0.0, -3);
  CHECK(std::abs(p - std::conj(n)) < 1e-15);
}
