#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/csv.hpp"
#include "vcsim/dps.hpp"
#include "vcsim/tensor.hpp"

namespace vcsim::chstats {

struct config {
  int region_snapshots = 240;  // M = t_stat / t_sys
  int tapers_time = 3;         // I
  int tapers_freq = 3;         // J
  // Threshold criterion for spread estimation.
  double above_noise_db = 5.0;
  double below_peak_db = 40.0;
  // When NaN, the noise floor is estimated from the largest-delay PDP bins.
  double noise_floor_db = std::numeric_limits<double>::quiet_NaN();
};

// Separable two-dimensional multitaper windows: G_w[m,q] = u_i[m] * v_j[q],
// w = i*J + j, with taper half-bandwidths 2/M and 2/N.
struct window_bank {
  int m = 0, n = 0, i = 0, j = 0;
  Eigen::MatrixXd ut;  // M x I
  Eigen::MatrixXd uf;  // N x J
};

inline window_bank make_window_bank(int m, int n, int i = 3, int j = 3) {
  if (m < 2 * i || n < 2 * j) throw validation_error("window bank: region too small for taper count");
  window_bank wb;
  wb.m = m;
  wb.n = n;
  wb.i = i;
  wb.j = j;
  double wt = 2.0 / static_cast<double>(m);
  double wf = 2.0 / static_cast<double>(n);
  auto bt = dps::make_basis(m, -wt, wt, i);
  auto bf = dps::make_basis(n, -wf, wf, j);
  wb.ut = bt.u.real();
  wb.uf = bf.u.real();
  return wb;
}

// Local scattering function of one stationarity region: delay index
// n in {0..N-1} (resolution 1/(N*delta_f)), Doppler index p in
// {-M/2..M/2-1} stored at column p + M/2 (resolution 1/(M*t_sys)).
struct lsf {
  int n_delay = 0;
  int n_doppler = 0;
  std::vector<double> c;  // n_delay x n_doppler, delay-major

  double at(int n, int p_signed) const {
    return c[static_cast<std::size_t>(n) * n_doppler + (p_signed + n_doppler / 2)];
  }
};

namespace detail {

struct dft_mats {
  Eigen::MatrixXcd et;  // M x M: rows signed Doppler p, exp(-j2pi p m / M)
  Eigen::MatrixXcd ef;  // N x N: cols delay n, exp(+j2pi n q / N)
};

inline dft_mats make_dft(int m, int n) {
  dft_mats d;
  d.et.resize(m, m);
  for (int pr = 0; pr < m; ++pr) {
    int p = pr - m / 2;
    for (int mm = 0; mm < m; ++mm)
      d.et(pr, mm) = std::exp(cd(0.0, -2.0 * pi * p * mm / static_cast<double>(m)));
  }
  d.ef.resize(n, n);
  for (int q = 0; q < n; ++q)
    for (int nn = 0; nn < n; ++nn)
      d.ef(q, nn) = std::exp(cd(0.0, 2.0 * pi * nn * q / static_cast<double>(n)));
  return d;
}

}  // namespace detail

// Multitaper spectral estimate averaged over the I*J tapered windowed DFTs of
// the region block. Phase offsets from absolute index conventions cancel in
// the squared magnitude.
inline lsf compute_lsf(const channel_tensor& t, std::size_t link, int region,
                       const window_bank& wb, const detail::dft_mats& dm) {
  const int m = wb.m;
  const int n = static_cast<int>(t.Q);
  if (wb.n != n) throw validation_error("window bank frequency size differs from tensor Q");
  long start = static_cast<long>(region) * m;
  if (start < 0 || start + m > static_cast<long>(t.T))
    throw validation_error("region " + std::to_string(region) + " outside tensor");

  Eigen::MatrixXcd g(m, n);
  for (int mm = 0; mm < m; ++mm)
    for (int q = 0; q < n; ++q) {
      cf v = t.at(link, static_cast<std::size_t>(start + mm), static_cast<std::size_t>(q));
      g(mm, q) = cd(v.real(), v.imag());
    }

  lsf out;
  out.n_delay = n;
  out.n_doppler = m;
  out.c.assign(static_cast<std::size_t>(n) * m, 0.0);
  const double norm = 1.0 / static_cast<double>(wb.i * wb.j);
  Eigen::MatrixXcd a(m, n), h(m, n);
  for (int i = 0; i < wb.i; ++i) {
    for (int j = 0; j < wb.j; ++j) {
      a = (wb.ut.col(i).cast<cd>() * wb.uf.col(j).cast<cd>().transpose()).cwiseProduct(g);
      h = dm.et * a * dm.ef;  // rows: Doppler, cols: delay
      for (int nn = 0; nn < n; ++nn)
        for (int pr = 0; pr < m; ++pr)
          out.c[static_cast<std::size_t>(nn) * m + pr] += norm * std::norm(h(pr, nn));
    }
  }
  return out;
}

inline std::vector<double> pdp(const lsf& c) {
  std::vector<double> p(static_cast<std::size_t>(c.n_delay), 0.0);
  for (int n = 0; n < c.n_delay; ++n) {
    double acc = 0.0;
    for (int pr = 0; pr < c.n_doppler; ++pr)
      acc += c.c[static_cast<std::size_t>(n) * c.n_doppler + pr];
    p[static_cast<std::size_t>(n)] = acc / static_cast<double>(c.n_doppler);
  }
  return p;
}

inline std::vector<double> dsd(const lsf& c) {
  std::vector<double> p(static_cast<std::size_t>(c.n_doppler), 0.0);
  for (int pr = 0; pr < c.n_doppler; ++pr) {
    double acc = 0.0;
    for (int n = 0; n < c.n_delay; ++n)
      acc += c.c[static_cast<std::size_t>(n) * c.n_doppler + pr];
    p[static_cast<std::size_t>(pr)] = acc / static_cast<double>(c.n_delay);
  }
  return p;
}

struct spread {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double rms = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
};

// Second central moment of a marginal profile over its bin axis, restricted to
// components at least `above_noise_db` over the floor and within
// `below_peak_db` of the peak. Empty selections yield NaN, not an error.
inline spread rms_spread(const std::vector<double>& profile, const std::vector<double>& axis,
                         double noise_floor_pow, double above_noise_db, double below_peak_db) {
  if (profile.size() != axis.size()) throw validation_error("rms_spread: axis length mismatch");
  double peak = 0.0;
  for (double v : profile) peak = std::max(peak, v);
  double lo = std::max(noise_floor_pow * db_to_pow(above_noise_db), peak * db_to_pow(-below_peak_db));
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    double v = profile[i];
    if (v < lo || v <= 0.0) continue;
    s0 += v;
    s1 += v * axis[i];
    s2 += v * axis[i] * axis[i];
  }
  spread out;
  if (s0 <= 0.0) return out;
  out.mean = s1 / s0;
  double var = s2 / s0 - out.mean * out.mean;
  out.rms = std::sqrt(std::max(0.0, var));
  out.valid = true;
  return out;
}

// Median power of the top 10% largest-delay PDP bins.
inline double estimate_noise_floor(const std::vector<double>& pdp_profile) {
  std::size_t n = pdp_profile.size();
  std::size_t k = std::max<std::size_t>(1, n / 10);
  std::vector<double> tail(pdp_profile.end() - static_cast<long>(k), pdp_profile.end());
  std::sort(tail.begin(), tail.end());
  return tail[tail.size() / 2];
}

struct region_stats {
  int k = 0;
  double t_center_s = 0.0;
  double path_loss_db = 0.0;
  spread delay;    // seconds
  spread doppler;  // Hz
};

struct link_stats {
  uint16_t a = 0, b = 0;
  std::vector<region_stats> regions;
};

inline link_stats analyze_link(const channel_tensor& t, std::size_t link, const config& cfg) {
  if (t.freq_convention != 0) return analyze_link(to_centered(t), link, cfg);
  if (cfg.region_snapshots < 2) throw validation_error("analyze: region too short");
  const int m = cfg.region_snapshots;
  const int n = static_cast<int>(t.Q);
  int regions = static_cast<int>(t.T) / m;
  if (regions < 1)
    throw validation_error("analyze: tensor shorter than one stationarity region (" +
                           std::to_string(t.T) + " < " + std::to_string(m) + " snapshots)");

  window_bank wb = make_window_bank(m, n, cfg.tapers_time, cfg.tapers_freq);
  auto dm = detail::make_dft(m, n);

  double tau_s = 1.0 / (static_cast<double>(n) * t.delta_f_hz);
  double nu_s = 1.0 / (static_cast<double>(m) * t.t_sys_s);
  std::vector<double> delay_axis(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) delay_axis[static_cast<std::size_t>(i)] = tau_s * i;
  std::vector<double> doppler_axis(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) doppler_axis[static_cast<std::size_t>(i)] = nu_s * (i - m / 2);

  link_stats out;
  out.a = t.links[link].a;
  out.b = t.links[link].b;
  out.regions.resize(static_cast<std::size_t>(regions));

  parallel_for(static_cast<std::size_t>(regions), [&](std::size_t k) {
    lsf c = compute_lsf(t, link, static_cast<int>(k), wb, dm);
    auto pd = pdp(c);
    auto dd = dsd(c);
    double nf = std::isnan(cfg.noise_floor_db) ? estimate_noise_floor(pd) : db_to_pow(cfg.noise_floor_db);

    region_stats rs;
    rs.k = static_cast<int>(k);
    rs.t_center_s = (static_cast<double>(k) + 0.5) * m * t.t_sys_s;
    double acc = 0.0;
    for (int mm = 0; mm < m; ++mm)
      for (int q = 0; q < n; ++q) {
        cf v = t.at(link, k * static_cast<std::size_t>(m) + mm, static_cast<std::size_t>(q));
        acc += std::norm(cd(v.real(), v.imag()));
      }
    rs.path_loss_db = -pow_to_db(acc / (static_cast<double>(m) * n));
    rs.delay = rms_spread(pd, delay_axis, nf, cfg.above_noise_db, cfg.below_peak_db);
    // Both marginals are means over the other axis, so noise-only bins sit at
    // the same level in the PDP and the DSD; reuse the estimate directly.
    rs.doppler = rms_spread(dd, doppler_axis, nf, cfg.above_noise_db, cfg.below_peak_db);
    out.regions[k] = rs;
  });
  return out;
}

inline csv::table stats_table(const link_stats& ls) {
  csv::table t;
  t.header = {"k", "t_center_s", "path_loss_db", "rms_delay_ns", "rms_doppler_hz",
              "mean_delay_ns", "mean_doppler_hz"};
  for (const auto& r : ls.regions) {
    t.rows.push_back({static_cast<double>(r.k), r.t_center_s, r.path_loss_db, r.delay.rms * 1e9,
                      r.doppler.rms, r.delay.mean * 1e9, r.doppler.mean});
  }
  return t;
}

}  // namespace vcsim::chstats
