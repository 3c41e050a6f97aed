#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/fft.hpp"

namespace vcsim::dps {

// Band-limited kernel K[m,n] = integral over [nu1, nu2] of exp(j2pi nu (m-n)).
inline cd band_kernel(double nu1, double nu2, long k) {
  if (k == 0) return cd(nu2 - nu1, 0.0);
  double a = 2.0 * pi * static_cast<double>(k);
  cd num = std::exp(cd(0.0, a * nu2)) - std::exp(cd(0.0, a * nu1));
  return num / cd(0.0, a);
}

struct basis {
  Eigen::MatrixXcd u;      // M x D, orthonormal columns, concentration-ordered
  Eigen::VectorXd lambda;  // band concentrations, non-increasing
  double nu1 = 0.0, nu2 = 0.0;

  bool is_real() const { return std::abs(nu1 + nu2) < 1e-15; }
};

namespace detail {

// Classical Slepian sequences of length M, half-bandwidth W, first D columns.
// Eigenvectors of the commuting symmetric tridiagonal matrix via LAPACK, which
// shares the eigenvectors of the sinc kernel but is O(M^2) instead of O(M^3).
inline Eigen::MatrixXd dpss_real(int m, double w, int d) {
  std::vector<double> diag(m), off(std::max(0, m - 1));
  double c = std::cos(2.0 * pi * w);
  for (int i = 0; i < m; ++i) {
    double x = (static_cast<double>(m - 1) / 2.0 - static_cast<double>(i));
    diag[i] = x * x * c;
  }
  for (int i = 0; i + 1 < m; ++i)
    off[i] = static_cast<double>(i + 1) * static_cast<double>(m - 1 - i) / 2.0;

  Eigen::MatrixXd z(m, d);
  std::vector<double> wout(m);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(std::max(1, d)));
  lapack_int found = 0;
  lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', m, diag.data(), off.data(), 0.0,
                                   0.0, m - d + 1, m, 0.0, &found, wout.data(), z.data(), m,
                                   isuppz.data());
  if (info != 0 || found != d)
    throw numeric_error("dpss: tridiagonal eigensolver failed (info=" + std::to_string(info) + ")");

  Eigen::MatrixXd u(m, d);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd v = z.col(d - 1 - k);  // ascending -> concentration-descending
    double s1 = v.sum();
    if (std::abs(s1) > 1e-8) {
      if (s1 < 0.0) v = -v;
    } else {
      double s2 = 0.0;
      for (int i = 0; i < m; ++i) s2 += v[i] * static_cast<double>(m - 1 - 2 * i);
      if (s2 < 0.0) v = -v;
    }
    u.col(k) = v;
  }
  return u;
}

// Concentration in [-W, W] via the sinc-kernel quadratic form, computed from
// the taper autocorrelation.
inline double concentration(const Eigen::VectorXd& u, double w) {
  const int m = static_cast<int>(u.size());
  auto kern = [&](long k) {
    if (k == 0) return 2.0 * w;
    return std::sin(2.0 * pi * w * static_cast<double>(k)) / (pi * static_cast<double>(k));
  };
  std::vector<double> r(static_cast<std::size_t>(m), 0.0);
  if (m <= 4096) {
    for (int tau = 0; tau < m; ++tau) {
      double acc = 0.0;
      for (int i = 0; i + tau < m; ++i) acc += u[i] * u[i + tau];
      r[static_cast<std::size_t>(tau)] = acc;
    }
  } else {
    std::size_t p = next_pow2(static_cast<std::size_t>(2 * m));
    std::vector<cd> a(p, cd(0.0, 0.0));
    for (int i = 0; i < m; ++i) a[static_cast<std::size_t>(i)] = u[i];
    fft_pow2(a, -1);
    for (auto& v : a) v = cd(std::norm(v), 0.0);
    fft_pow2(a, +1);
    for (int tau = 0; tau < m; ++tau)
      r[static_cast<std::size_t>(tau)] = a[static_cast<std::size_t>(tau)].real() / static_cast<double>(p);
  }
  double acc = kern(0) * r[0];
  for (int tau = 1; tau < m; ++tau) acc += 2.0 * kern(tau) * r[static_cast<std::size_t>(tau)];
  return acc;
}

}  // namespace detail

// First D eigenvectors of the [nu1, nu2] band-limited kernel, ordered by
// concentration. An asymmetric band is the symmetric problem of half-width
// (nu2-nu1)/2 modulated to the band center, which leaves eigenvalues intact
// and keeps columns orthonormal.
inline basis make_basis(int m, double nu1, double nu2, int d) {
  if (m < 2 || d < 1 || d > m) throw validation_error("make_basis: need 2 <= D <= M");
  if (!(nu2 > nu1)) throw validation_error("make_basis: empty band");
  if (nu2 - nu1 > 1.0 || nu1 < -0.5 - 1e-12 || nu2 > 0.5 + 1e-12)
    throw validation_error("make_basis: band outside the fundamental domain");

  double w = (nu2 - nu1) / 2.0;
  double center = (nu1 + nu2) / 2.0;
  Eigen::MatrixXd ur = detail::dpss_real(m, w, d);

  basis b;
  b.nu1 = nu1;
  b.nu2 = nu2;
  b.u.resize(m, d);
  if (std::abs(center) < 1e-15) {
    b.u = ur.cast<cd>();
  } else {
    Eigen::VectorXcd mod(m);
    for (int i = 0; i < m; ++i)
      mod[i] = std::exp(cd(0.0, 2.0 * pi * center * static_cast<double>(i)));
    for (int k = 0; k < d; ++k) b.u.col(k) = mod.cwiseProduct(ur.col(k).cast<cd>());
  }
  b.lambda.resize(d);
  for (int k = 0; k < d; ++k) b.lambda[k] = detail::concentration(ur.col(k), w);
  return b;
}

}  // namespace vcsim::dps
