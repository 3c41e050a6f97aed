#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/fft.hpp"
#include "vcsim/gscm.hpp"
#include "vcsim/rng.hpp"
#include "vcsim/scenario.hpp"
#include "vcsim/tensor.hpp"

namespace vcsim::synth {

struct sounder_config {
  int n_nodes = 3;
  double f_c_hz = 5.9e9;
  uint32_t q_subcarriers = 601;
  double delta_f_hz = 250e3;
  double t_sys_s = 500e-6;
  double v_max_ms = 11.5;
  double t_stat_s = 0.12;           // stationarity region duration
  double noise_floor_db = -100.0;   // dB relative to unit channel gain
  bool noise_enable = false;

  double t_s_s() const { return t_sys_s / static_cast<double>(n_nodes - 1); }
  double bandwidth_hz() const { return static_cast<double>(q_subcarriers) * delta_f_hz; }
  double delay_res_s() const { return 1.0 / bandwidth_hz(); }
  double doppler_res_hz() const { return 1.0 / t_stat_s; }
  int region_snapshots() const { return static_cast<int>(std::lround(t_stat_s / t_sys_s)); }

  void validate() const {
    if (n_nodes < 2) throw validation_error("sounder needs at least 2 nodes");
    if (q_subcarriers == 0 || delta_f_hz <= 0.0 || t_sys_s <= 0.0)
      throw validation_error("sounder grid parameters must be positive");
    double bound = c0 / (2.0 * f_c_hz * v_max_ms);
    if (!(t_sys_s < bound))
      throw validation_error("snapshot interval " + std::to_string(t_sys_s) +
                             " s violates the stationarity bound " + std::to_string(bound) + " s");
    if (region_snapshots() < 2)
      throw validation_error("stationarity region shorter than two snapshots");
  }

  // Full-scale measurement grid.
  static sounder_config table2() { return sounder_config{}; }

  // Reduced bandwidth for fast runs; time axis unchanged.
  static sounder_config desk() {
    sounder_config c;
    c.q_subcarriers = 61;
    return c;
  }
};

// Highest resolvable Doppler of the switched-node schedule.
inline double max_doppler_hz(int n_nodes, double t_s_s) {
  if (n_nodes < 2 || t_s_s <= 0.0) throw validation_error("max_doppler: invalid schedule");
  return 1.0 / (2.0 * static_cast<double>(n_nodes - 1) * t_s_s);
}

inline std::pair<int, int> canonical(std::pair<int, int> link) {
  return {std::min(link.first, link.second), std::max(link.first, link.second)};
}

// Frequency response synthesis: g[m,q] = sum_i gain_i(t_m) * exp(-j2pi f_q tau_i(t_m)),
// f_q baseband-centered. Doppler arises from the snapshot-to-snapshot evolution
// of delays and carrier phases; no explicit Doppler term is injected.
inline channel_tensor synthesize(const scenario::scenario& sc,
                                 const std::vector<std::pair<int, int>>& links, double duration_s,
                                 const sounder_config& cfg, uint64_t seed) {
  cfg.validate();
  const int L = sc.n_nodes();
  if (cfg.n_nodes != L)
    throw validation_error("sounder configured for " + std::to_string(cfg.n_nodes) +
                           " nodes but scenario has " + std::to_string(L));
  if (links.empty()) throw validation_error("no links requested");
  uint32_t T = static_cast<uint32_t>(std::lround(duration_s / cfg.t_sys_s));
  if (T == 0) throw validation_error("duration shorter than one snapshot");

  channel_tensor out;
  out.n_nodes = static_cast<uint32_t>(L);
  out.T = T;
  out.Q = cfg.q_subcarriers;
  out.f_c_hz = cfg.f_c_hz;
  out.delta_f_hz = cfg.delta_f_hz;
  out.t_sys_s = cfg.t_sys_s;
  out.freq_convention = 0;

  auto population = scenario::populate_diffuse(sc.geometry, sc.params, seed);

  // Forward pass per unordered pair; the reverse direction is the conjugate.
  std::vector<std::pair<int, int>> pairs;
  for (auto lk : links) {
    if (lk.first == lk.second || lk.first < 1 || lk.second < 1 || lk.first > L || lk.second > L)
      throw validation_error("invalid link (" + std::to_string(lk.first) + "," +
                             std::to_string(lk.second) + ")");
    auto c = canonical(lk);
    if (std::find(pairs.begin(), pairs.end(), c) == pairs.end()) pairs.push_back(c);
  }

  const uint32_t Q = out.Q;
  const double f0 = -static_cast<double>(Q / 2) * cfg.delta_f_hz;

  std::vector<channel_tensor::link_data> fwd(pairs.size());
  for (std::size_t li = 0; li < pairs.size(); ++li) {
    auto [a, b] = pairs[li];
    gscm::link_sampler sampler(sc, population, a, b, cfg.f_c_hz, seed);
    int phase = a - 1;

    // Pass 1, sequential in m: fading continuity.
    std::vector<std::vector<std::pair<cd, double>>> snaps(T);
    for (uint32_t m = 0; m < T; ++m) {
      double t = static_cast<double>(m) * cfg.t_sys_s + static_cast<double>(phase) * cfg.t_s_s();
      auto paths = sampler.at(t);
      snaps[m].reserve(paths.size());
      for (const auto& p : paths) snaps[m].emplace_back(p.gain, p.delay_s);
    }

    channel_tensor::link_data ld;
    ld.a = static_cast<uint16_t>(a);
    ld.b = static_cast<uint16_t>(b);
    ld.g.resize(static_cast<std::size_t>(T) * Q);

    double noise_amp = cfg.noise_enable ? std::sqrt(db_to_pow(cfg.noise_floor_db)) : 0.0;
    counter_rng noise_base = counter_rng(seed).stream(0x4015Eu, static_cast<uint64_t>(a),
                                                      static_cast<uint64_t>(b));

    // Pass 2, parallel in m: plain path sum per subcarrier.
    parallel_for(T, [&](std::size_t m) {
      std::vector<cd> row(Q, cd(0.0, 0.0));
      for (const auto& [gain, tau] : snaps[m]) {
        double a0 = -2.0 * pi * f0 * tau;
        double astep = -2.0 * pi * cfg.delta_f_hz * tau;
        cd w = gain * cd(std::cos(a0), std::sin(a0));
        cd step(std::cos(astep), std::sin(astep));
        for (uint32_t q = 0; q < Q; ++q) {
          row[q] += w;
          w *= step;
        }
      }
      if (noise_amp > 0.0) {
        counter_rng nr = noise_base.stream(m);
        for (uint32_t q = 0; q < Q; ++q) {
          cd z = nr.stream(q).cnormal();
          row[q] += noise_amp * z;
        }
      }
      for (uint32_t q = 0; q < Q; ++q)
        ld.g[m * Q + q] = cf(static_cast<float>(row[q].real()), static_cast<float>(row[q].imag()));
    });
    fwd[li] = std::move(ld);
  }

  for (auto lk : links) {
    auto c = canonical(lk);
    std::size_t idx = static_cast<std::size_t>(
        std::find(pairs.begin(), pairs.end(), c) - pairs.begin());
    channel_tensor::link_data ld = fwd[idx];
    ld.a = static_cast<uint16_t>(lk.first);
    ld.b = static_cast<uint16_t>(lk.second);
    if (lk.first > lk.second)
      for (auto& v : ld.g) v = std::conj(v);
    out.links.push_back(std::move(ld));
  }
  return out;
}

struct sounding_signal {
  std::vector<cd> x;  // per-subcarrier complex tone weights, |x[q]| = 1
  double crest_db = 0.0;
};

// Crest factor of the multitone with the given per-tone weights, evaluated on
// an oversampled time grid. 10*log10(peak power / mean power).
inline double crest_factor_db(const std::vector<cd>& x, std::size_t oversample = 4) {
  std::size_t P = next_pow2(std::max<std::size_t>(x.size() * oversample, 64));
  std::vector<cd> a(P, cd(0.0, 0.0));
  for (std::size_t q = 0; q < x.size(); ++q) a[q] = x[q];
  fft_pow2(a, +1);
  double peak = 0.0, acc = 0.0;
  for (const cd& v : a) {
    double p = std::norm(v);
    peak = std::max(peak, p);
    acc += p;
  }
  acc /= static_cast<double>(P);
  return 10.0 * std::log10(peak / acc);
}

// Unit-magnitude tone phases with low crest factor: quadratic-phase start,
// then iterative clip-and-restore refinement. Deterministic per seed.
inline sounding_signal generate_sounding_signal(uint32_t q_subcarriers, uint64_t seed,
                                                int max_iter = 200) {
  if (q_subcarriers == 0) throw validation_error("sounding signal needs at least one tone");
  const std::size_t Q = q_subcarriers;
  counter_rng rng = counter_rng(seed).stream(0x50D4u);

  std::vector<cd> x(Q);
  for (std::size_t q = 0; q < Q; ++q) {
    double ph = pi * static_cast<double>(q) * static_cast<double>(q) / static_cast<double>(Q) +
                0.01 * rng.uniform_at(q);
    x[q] = cd(std::cos(ph), std::sin(ph));
  }

  std::size_t P = next_pow2(std::max<std::size_t>(Q * 4, 64));
  std::vector<cd> best = x;
  double best_cf = crest_factor_db(x);
  std::vector<cd> a(P);
  for (int it = 0; it < max_iter; ++it) {
    std::fill(a.begin(), a.end(), cd(0.0, 0.0));
    for (std::size_t q = 0; q < Q; ++q) a[q] = x[q];
    fft_pow2(a, +1);
    double mean = 0.0;
    for (const cd& v : a) mean += std::norm(v);
    mean /= static_cast<double>(P);
    double clip = std::sqrt(mean) * db_to_amp(2.0);
    for (cd& v : a) {
      double m = std::abs(v);
      if (m > clip) v *= clip / m;
    }
    fft_pow2(a, -1);
    for (std::size_t q = 0; q < Q; ++q) {
      double m = std::abs(a[q]);
      x[q] = m > 0.0 ? a[q] / m : cd(1.0, 0.0);
    }
    double cf = crest_factor_db(x);
    if (cf < best_cf) {
      best_cf = cf;
      best = x;
    }
  }
  return {std::move(best), best_cf};
}

// Receiver-side correction: g = y / (x * g_cal), per subcarrier.
inline std::vector<cd> calibrate_row(const std::vector<cd>& y, const std::vector<cd>& x,
                                     const std::vector<cd>& g_cal) {
  if (y.size() != x.size() || y.size() != g_cal.size())
    throw validation_error("calibrate: length mismatch");
  std::vector<cd> g(y.size());
  for (std::size_t q = 0; q < y.size(); ++q) {
    cd d = x[q] * g_cal[q];
    if (std::abs(d) < 1e-30)
      throw numeric_error("calibrate: zero reference at subcarrier " + std::to_string(q));
    g[q] = y[q] / d;
  }
  return g;
}

inline channel_tensor calibrate(const channel_tensor& y, const std::vector<cd>& x,
                                const std::vector<cd>& g_cal) {
  if (x.size() != y.Q || g_cal.size() != y.Q)
    throw validation_error("calibrate: reference length differs from tensor Q");
  channel_tensor out = y;
  for (auto& l : out.links) {
    for (uint32_t m = 0; m < y.T; ++m) {
      for (uint32_t q = 0; q < y.Q; ++q) {
        cd d = x[q] * g_cal[q];
        if (std::abs(d) < 1e-30)
          throw numeric_error("calibrate: zero reference at subcarrier " + std::to_string(q));
        cd v = cd(l.g[m * y.Q + q]) / d;
        l.g[m * y.Q + q] = cf(static_cast<float>(v.real()), static_cast<float>(v.imag()));
      }
    }
  }
  return out;
}

}  // namespace vcsim::synth
