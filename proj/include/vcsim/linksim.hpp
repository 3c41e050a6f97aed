#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vcsim/common.hpp"
#include "vcsim/csv.hpp"
#include "vcsim/rng.hpp"
#include "vcsim/tensor.hpp"

namespace vcsim::linksim {

enum class modulation { qpsk, qam64 };
enum class code_rate { half, three_quarter };

struct phy_config {
  double bandwidth_hz = 10e6;
  int fft_size = 64;
  int n_data = 48;
  int n_pilot = 4;
  double guard_s = 1.6e-6;
  modulation mod = modulation::qpsk;
  code_rate rate = code_rate::half;
  int packet_bytes = 100;
  double packet_rate_hz = 1000.0;
  double tx_power_dbm = 0.0;
  double noise_density_dbm_hz = -174.0;
  double noise_figure_db = 10.0;
  double stat_window_s = 0.12;

  double subcarrier_spacing_hz() const { return bandwidth_hz / fft_size; }
  double symbol_s() const { return fft_size / bandwidth_hz + guard_s; }
  int n_bpsc() const { return mod == modulation::qpsk ? 2 : 6; }
  int n_cbps() const { return n_data * n_bpsc(); }
  int n_dbps() const { return rate == code_rate::half ? n_cbps() / 2 : n_cbps() * 3 / 4; }
  double offered_load_bps() const { return packet_bytes * 8.0 * packet_rate_hz; }
  double noise_var_mw() const {
    return db_to_pow(noise_density_dbm_hz + noise_figure_db) * subcarrier_spacing_hz();
  }
  double tx_amp_mw_sqrt() const {
    return std::sqrt(db_to_pow(tx_power_dbm) / static_cast<double>(n_data + n_pilot));
  }

  void validate() const {
    if (fft_size != 64 || n_data != 48 || n_pilot != 4)
      throw validation_error("phy: only the 64-point / 48+4 carrier layout is supported");
    bool paper_pair = (mod == modulation::qpsk && rate == code_rate::half) ||
                      (mod == modulation::qam64 && rate == code_rate::three_quarter);
    if (!paper_pair)
      throw validation_error("phy: modulation/rate restricted to qpsk+1/2 or 64qam+3/4");
    if (packet_bytes < 1 || packet_rate_hz <= 0 || bandwidth_hz <= 0 || stat_window_s <= 0)
      throw validation_error("phy: non-positive parameter");
  }
};

namespace detail {

// Data carriers in ascending subcarrier index; pilots at +-7, +-21, DC unused.
inline const std::vector<int>& data_carriers() {
  static const std::vector<int> v = [] {
    std::vector<int> c;
    for (int k = -26; k <= 26; ++k) {
      if (k == 0 || k == 7 || k == -7 || k == 21 || k == -21) continue;
      c.push_back(k);
    }
    return c;
  }();
  return v;
}

// x^7 + x^4 + 1 scrambler, all-ones start.
inline void scramble(std::vector<uint8_t>& bits) {
  unsigned s = 0x7F;
  for (auto& b : bits) {
    unsigned f = ((s >> 6) ^ (s >> 3)) & 1u;
    b = static_cast<uint8_t>(b ^ f);
    s = ((s << 1) | f) & 0x7F;
  }
}

inline int parity7(unsigned x) {
  x &= 0x7F;
  x ^= x >> 4;
  x ^= x >> 2;
  x ^= x >> 1;
  return static_cast<int>(x & 1u);
}

// K=7 convolutional code, generators 133/171 (octal), zero-terminated input.
inline std::vector<uint8_t> conv_encode(const std::vector<uint8_t>& bits) {
  std::vector<uint8_t> out(bits.size() * 2);
  unsigned state = 0;  // previous six bits, newest at bit 5
  for (std::size_t i = 0; i < bits.size(); ++i) {
    unsigned full = (static_cast<unsigned>(bits[i]) << 6) | state;
    out[2 * i] = static_cast<uint8_t>(parity7(full & 0x5B));      // 133
    out[2 * i + 1] = static_cast<uint8_t>(parity7(full & 0x79));  // 171
    state = (full >> 1) & 0x3F;
  }
  return out;
}

// Rate 3/4 puncturing: of each (A0 B0 A1 B1 A2 B2) transmit A0 B0 A1 B2.
inline bool punct_34_kept(std::size_t i) {
  switch (i % 6) {
    case 0:
    case 1:
    case 2:
    case 5: return true;
    default: return false;
  }
}

inline std::vector<uint8_t> puncture_34(const std::vector<uint8_t>& coded) {
  std::vector<uint8_t> out;
  out.reserve(coded.size() * 2 / 3);
  for (std::size_t i = 0; i < coded.size(); ++i)
    if (punct_34_kept(i)) out.push_back(coded[i]);
  return out;
}

// Per-symbol block interleaver (16 columns, second permutation step s).
inline std::vector<int> interleave_map(int n_cbps, int n_bpsc) {
  int s = std::max(n_bpsc / 2, 1);
  std::vector<int> perm(static_cast<std::size_t>(n_cbps));
  for (int k = 0; k < n_cbps; ++k) {
    int i = (n_cbps / 16) * (k % 16) + k / 16;
    int j = s * (i / s) + (i + n_cbps - 16 * i / n_cbps) % s;
    perm[static_cast<std::size_t>(k)] = j;
  }
  return perm;
}

// Gray axis labels: index is the bit triple (b0 b1 b2), value the PAM level.
inline const std::array<double, 8>& qam64_axis() {
  static const std::array<double, 8> v = {-7, -5, -1, -3, 7, 5, 1, 3};
  return v;
}

inline cd map_qpsk(const uint8_t* b) {
  return cd((2.0 * b[0] - 1.0) / std::sqrt(2.0), (2.0 * b[1] - 1.0) / std::sqrt(2.0));
}

inline cd map_qam64(const uint8_t* b) {
  const auto& ax = qam64_axis();
  int bi = (b[0] << 2) | (b[1] << 1) | b[2];
  int bq = (b[3] << 2) | (b[4] << 1) | b[5];
  return cd(ax[static_cast<std::size_t>(bi)] / std::sqrt(42.0),
            ax[static_cast<std::size_t>(bq)] / std::sqrt(42.0));
}

// Max-log bit LLRs (positive favors bit 0) for one equalized axis sample.
inline void pam_llrs(double x, double axis_scale, const double* levels, int n_levels, int n_bits,
                     double inv_var, double* out) {
  for (int b = 0; b < n_bits; ++b) {
    double d0 = 1e300, d1 = 1e300;
    for (int a = 0; a < n_levels; ++a) {
      double d = x - levels[a] * axis_scale;
      d *= d;
      if ((a >> (n_bits - 1 - b)) & 1)
        d1 = std::min(d1, d);
      else
        d0 = std::min(d0, d);
    }
    out[b] = (d1 - d0) * inv_var;
  }
}

// y: received sample, h: channel, amp: tx amplitude, var: complex noise power.
inline void symbol_llrs(cd y, cd h, double amp, double var, modulation mod, double* out) {
  double hg = std::norm(h) * amp * amp;
  if (hg < 1e-300) {
    int nb = mod == modulation::qpsk ? 2 : 6;
    for (int i = 0; i < nb; ++i) out[i] = 0.0;
    return;
  }
  cd z = y / (h * amp);
  double axis_var = var / hg;  // variance per complex sample after equalizing
  double inv = 1.0 / axis_var;
  if (mod == modulation::qpsk) {
    static const double lv[2] = {-1, 1};  // index = bit value
    double l[1];
    pam_llrs(z.real(), 1.0 / std::sqrt(2.0), lv, 2, 1, inv, l);
    out[0] = l[0];
    pam_llrs(z.imag(), 1.0 / std::sqrt(2.0), lv, 2, 1, inv, l);
    out[1] = l[0];
  } else {
    const auto& ax = qam64_axis();
    pam_llrs(z.real(), 1.0 / std::sqrt(42.0), ax.data(), 8, 3, inv, out);
    pam_llrs(z.imag(), 1.0 / std::sqrt(42.0), ax.data(), 8, 3, inv, out + 3);
  }
}

// Soft Viterbi over the zero-terminated 64-state trellis; llrs laid out as
// coded-bit pairs per info bit (0 entries mark punctured positions).
inline std::vector<uint8_t> viterbi_decode(const std::vector<double>& llrs, std::size_t n_info) {
  struct tables {
    std::array<int8_t, 128> o0, o1;
    tables() {
      for (unsigned f = 0; f < 128; ++f) {
        o0[f] = static_cast<int8_t>(parity7(f & 0x5B));
        o1[f] = static_cast<int8_t>(parity7(f & 0x79));
      }
    }
  };
  static const tables tb;

  constexpr double kneg = -1e300;
  std::vector<double> pm(64, kneg), nx(64);
  pm[0] = 0.0;
  std::vector<uint8_t> dec(n_info * 64);
  for (std::size_t t = 0; t < n_info; ++t) {
    double l0 = llrs[2 * t], l1 = llrs[2 * t + 1];
    std::fill(nx.begin(), nx.end(), kneg);
    uint8_t* d = dec.data() + t * 64;
    for (unsigned s = 0; s < 64; ++s) {
      if (pm[s] == kneg) continue;
      for (unsigned u = 0; u < 2; ++u) {
        unsigned full = (u << 6) | s;
        double bm = (tb.o0[full] ? -l0 : l0) + (tb.o1[full] ? -l1 : l1);
        unsigned next = full >> 1;
        double cand = pm[s] + bm;
        if (cand > nx[next]) {
          nx[next] = cand;
          d[next] = static_cast<uint8_t>(s & 1u);
        }
      }
    }
    std::swap(pm, nx);
  }
  std::vector<uint8_t> bits(n_info);
  unsigned s = 0;  // zero-terminated
  for (std::size_t t = n_info; t-- > 0;) {
    bits[t] = static_cast<uint8_t>(s >> 5);
    s = ((s & 31u) << 1) | dec[t * 64 + s];
  }
  return bits;
}

struct bit_source {
  counter_rng rng;
  uint64_t idx = 0;
  uint64_t word = 0;
  int avail = 0;
  explicit bit_source(counter_rng r) : rng(r) {}
  uint8_t next() {
    if (avail == 0) {
      word = rng.at(idx++);
      avail = 64;
    }
    uint8_t b = static_cast<uint8_t>(word & 1u);
    word >>= 1;
    --avail;
    return b;
  }
};

}  // namespace detail

// Per-OFDM-symbol channel coefficients for the 48 data carriers, interpolated
// from a tensor link by frequency value; time maps to the nearest snapshot.
class tensor_channel {
 public:
  tensor_channel(const channel_tensor& t, std::size_t link, const phy_config& phy)
      : t_(&t), link_(link) {
    std::vector<std::pair<double, std::size_t>> bins(t.Q);
    for (std::size_t q = 0; q < t.Q; ++q) bins[q] = {t.freq_hz(q), q};
    std::sort(bins.begin(), bins.end());
    const auto& dc = detail::data_carriers();
    lo_.resize(dc.size());
    hi_.resize(dc.size());
    w_.resize(dc.size());
    for (std::size_t i = 0; i < dc.size(); ++i) {
      double f = dc[i] * phy.subcarrier_spacing_hz();
      if (f < bins.front().first - 1e-3 || f > bins.back().first + 1e-3)
        throw validation_error("phy carrier at " + std::to_string(f) +
                               " Hz outside the tensor band");
      auto it = std::lower_bound(bins.begin(), bins.end(), std::make_pair(f, std::size_t(0)));
      if (it == bins.begin()) {
        lo_[i] = hi_[i] = bins.front().second;
        w_[i] = 0.0;
      } else if (it == bins.end() || std::abs(it->first - f) < 1e-6) {
        std::size_t q = it == bins.end() ? bins.back().second : it->second;
        lo_[i] = hi_[i] = q;
        w_[i] = 0.0;
      } else {
        auto p = std::prev(it);
        lo_[i] = p->second;
        hi_[i] = it->second;
        w_[i] = (f - p->first) / (it->first - p->first);
      }
    }
  }

  std::size_t snapshot_for(double t_s) const {
    long m = std::lround(t_s / t_->t_sys_s);
    m = std::clamp<long>(m, 0, static_cast<long>(t_->T) - 1);
    return static_cast<std::size_t>(m);
  }

  void gains(std::size_t m, std::vector<cd>& h) const {
    h.resize(lo_.size());
    for (std::size_t i = 0; i < lo_.size(); ++i) {
      cf a = t_->at(link_, m, lo_[i]);
      cf b = t_->at(link_, m, hi_[i]);
      cd ca(a.real(), a.imag()), cb(b.real(), b.imag());
      h[i] = ca + (cb - ca) * w_[i];
    }
  }

  double duration_s() const { return static_cast<double>(t_->T) * t_->t_sys_s; }

 private:
  const channel_tensor* t_;
  std::size_t link_;
  std::vector<std::size_t> lo_, hi_;
  std::vector<double> w_;
};

struct per_series {
  std::vector<double> t_center_s;
  std::vector<double> per;
  std::vector<int> packets;
  std::vector<int> errors;
};

struct per_envelope {
  std::vector<double> t_center_s;
  std::vector<double> lo, mean, hi;
};

namespace detail {

// One packet through encode -> channel -> decode; returns true on packet error.
// h_per_symbol supplies the 48 data-carrier gains for each OFDM symbol.
template <typename ChannelFn>
inline bool run_packet(const phy_config& phy, ChannelFn&& h_at_symbol, double amp, double var,
                       counter_rng rng) {
  const int n_dbps = phy.n_dbps();
  const int n_cbps = phy.n_cbps();
  const int n_bpsc = phy.n_bpsc();
  int payload_bits = phy.packet_bytes * 8;
  int raw = 16 + payload_bits + 6;
  int n_sym = (raw + n_dbps - 1) / n_dbps;
  std::size_t n_info = static_cast<std::size_t>(n_sym) * n_dbps;

  std::vector<uint8_t> bits(n_info, 0);
  bit_source src(rng.stream(1));
  for (int i = 0; i < payload_bits; ++i) bits[static_cast<std::size_t>(16 + i)] = src.next();
  scramble(bits);
  // tail and pad forced back to zero so the encoder ends in state 0
  for (std::size_t i = static_cast<std::size_t>(16 + payload_bits); i < n_info; ++i) bits[i] = 0;

  std::vector<uint8_t> coded = conv_encode(bits);
  std::vector<uint8_t> tx = phy.rate == code_rate::three_quarter ? puncture_34(coded) : coded;

  static thread_local std::vector<int> perm;
  static thread_local int perm_cbps = 0, perm_bpsc = 0;
  if (perm_cbps != n_cbps || perm_bpsc != n_bpsc) {
    perm = interleave_map(n_cbps, n_bpsc);
    perm_cbps = n_cbps;
    perm_bpsc = n_bpsc;
  }

  counter_rng noise = rng.stream(2);
  std::vector<double> rx_llr(tx.size());
  std::vector<uint8_t> sym_bits(static_cast<std::size_t>(n_cbps));
  std::vector<cd> h;
  double llr6[6];
  for (int s = 0; s < n_sym; ++s) {
    const uint8_t* blk = tx.data() + static_cast<std::size_t>(s) * n_cbps;
    for (int k = 0; k < n_cbps; ++k) sym_bits[static_cast<std::size_t>(perm[k])] = blk[k];
    h_at_symbol(s, h);
    for (int c = 0; c < phy.n_data; ++c) {
      const uint8_t* b = sym_bits.data() + static_cast<std::size_t>(c) * n_bpsc;
      cd x = phy.mod == modulation::qpsk ? map_qpsk(b) : map_qam64(b);
      cd y = h[static_cast<std::size_t>(c)] * amp * x + std::sqrt(var) * noise.cnormal();
      symbol_llrs(y, h[static_cast<std::size_t>(c)], amp, var, phy.mod, llr6);
      for (int i = 0; i < n_bpsc; ++i)
        rx_llr[static_cast<std::size_t>(s) * n_cbps + static_cast<std::size_t>(c * n_bpsc + i)] =
            llr6[i];
    }
    // deinterleave in place for this symbol
    static thread_local std::vector<double> tmp;
    tmp.assign(rx_llr.begin() + static_cast<long>(s) * n_cbps,
               rx_llr.begin() + static_cast<long>(s + 1) * n_cbps);
    for (int k = 0; k < n_cbps; ++k)
      rx_llr[static_cast<std::size_t>(s) * n_cbps + static_cast<std::size_t>(k)] =
          tmp[static_cast<std::size_t>(perm[k])];
  }

  std::vector<double> soft(coded.size(), 0.0);
  if (phy.rate == code_rate::three_quarter) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < coded.size(); ++i)
      if (punct_34_kept(i)) soft[i] = rx_llr[j++];
  } else {
    soft = rx_llr;
  }

  std::vector<uint8_t> dec = viterbi_decode(soft, n_info);
  for (int i = 0; i < payload_bits; ++i)
    if (dec[static_cast<std::size_t>(16 + i)] != bits[static_cast<std::size_t>(16 + i)])
      return true;
  return false;
}

}  // namespace detail

inline per_series run_link(const channel_tensor& t, std::size_t link, const phy_config& phy,
                           uint64_t seed) {
  phy.validate();
  if (link >= t.links.size()) throw validation_error("run_link: link index out of range");
  tensor_channel chan(t, link, phy);
  double duration = chan.duration_s();
  int n_windows = static_cast<int>(duration / phy.stat_window_s + 1e-9);
  if (n_windows < 1)
    throw validation_error("run_link: tensor spans less than one statistics window");
  double t_end = n_windows * phy.stat_window_s;
  std::size_t n_packets = static_cast<std::size_t>(std::floor(t_end * phy.packet_rate_hz + 1e-9));

  double amp = phy.tx_amp_mw_sqrt();
  double var = phy.noise_var_mw();
  double sym_s = phy.symbol_s();
  counter_rng base = counter_rng(seed).stream(0x4C4B, static_cast<uint64_t>(link));

  std::vector<uint8_t> err(n_packets, 0);
  parallel_for(n_packets, [&](std::size_t p) {
    double t0 = static_cast<double>(p) / phy.packet_rate_hz;
    bool e = detail::run_packet(
        phy,
        [&](int s, std::vector<cd>& h) { chan.gains(chan.snapshot_for(t0 + (s + 0.5) * sym_s), h); },
        amp, var, base.stream(p));
    err[p] = e ? 1 : 0;
  });

  per_series out;
  out.t_center_s.resize(static_cast<std::size_t>(n_windows));
  out.packets.assign(static_cast<std::size_t>(n_windows), 0);
  out.errors.assign(static_cast<std::size_t>(n_windows), 0);
  for (std::size_t p = 0; p < n_packets; ++p) {
    int w = static_cast<int>(static_cast<double>(p) / phy.packet_rate_hz / phy.stat_window_s);
    if (w >= n_windows) break;
    out.packets[static_cast<std::size_t>(w)] += 1;
    out.errors[static_cast<std::size_t>(w)] += err[p];
  }
  out.per.resize(static_cast<std::size_t>(n_windows));
  for (int w = 0; w < n_windows; ++w) {
    out.t_center_s[static_cast<std::size_t>(w)] = (w + 0.5) * phy.stat_window_s;
    int n = out.packets[static_cast<std::size_t>(w)];
    out.per[static_cast<std::size_t>(w)] =
        n > 0 ? static_cast<double>(out.errors[static_cast<std::size_t>(w)]) / n : 0.0;
  }
  return out;
}

// Fixed-SNR AWGN reference: flat unit channel, Es/N0 = snr_db per data carrier.
inline double run_awgn(const phy_config& phy, double snr_db, std::size_t n_packets,
                       uint64_t seed) {
  phy.validate();
  double var = db_to_pow(-snr_db);
  counter_rng base = counter_rng(seed).stream(0xA389);
  std::vector<uint8_t> err(n_packets, 0);
  parallel_for(n_packets, [&](std::size_t p) {
    err[p] = detail::run_packet(
                 phy,
                 [&](int, std::vector<cd>& h) { h.assign(static_cast<std::size_t>(phy.n_data), cd(1, 0)); },
                 1.0, var, base.stream(p))
                 ? 1
                 : 0;
  });
  std::size_t e = 0;
  for (auto v : err) e += v;
  return n_packets ? static_cast<double>(e) / static_cast<double>(n_packets) : 0.0;
}

// Uncoded QPSK over AWGN; closed-form reference is Q(sqrt(Es/N0)) per bit.
inline double run_awgn_uncoded_qpsk_ber(double snr_db, std::size_t n_bits, uint64_t seed) {
  double var = db_to_pow(-snr_db);
  double sigma_axis = std::sqrt(var / 2.0);
  counter_rng rng = counter_rng(seed).stream(0xBE7);
  std::size_t n_sym = (n_bits + 1) / 2;
  std::size_t errors = 0;
  detail::bit_source src(rng.stream(1));
  counter_rng noise = rng.stream(2);
  const double a = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < n_sym; ++i) {
    uint8_t b0 = src.next(), b1 = src.next();
    double yi = (2.0 * b0 - 1.0) * a + sigma_axis * noise.normal();
    double yq = (2.0 * b1 - 1.0) * a + sigma_axis * noise.normal();
    errors += (yi > 0) != (b0 == 1);
    errors += (yq > 0) != (b1 == 1);
  }
  return static_cast<double>(errors) / static_cast<double>(2 * n_sym);
}

inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline per_envelope ensemble(const std::vector<per_series>& runs) {
  if (runs.empty()) throw validation_error("ensemble: no runs");
  std::size_t n = runs.front().per.size();
  for (const auto& r : runs)
    if (r.per.size() != n) throw validation_error("ensemble: window counts differ");
  per_envelope env;
  env.t_center_s = runs.front().t_center_s;
  env.lo.assign(n, 1.0);
  env.hi.assign(n, 0.0);
  env.mean.assign(n, 0.0);
  for (const auto& r : runs)
    for (std::size_t k = 0; k < n; ++k) {
      env.lo[k] = std::min(env.lo[k], r.per[k]);
      env.hi[k] = std::max(env.hi[k], r.per[k]);
      env.mean[k] += r.per[k] / static_cast<double>(runs.size());
    }
  return env;
}

// Fraction of windows where the reference series lies inside [lo, hi]
// (inclusive; PER values are exact ratios of small integers).
inline double envelope_containment(const per_series& ref, const per_envelope& env) {
  if (ref.per.size() != env.lo.size())
    throw validation_error("envelope_containment: window counts differ");
  if (ref.per.empty()) throw validation_error("envelope_containment: empty series");
  std::size_t inside = 0;
  for (std::size_t k = 0; k < ref.per.size(); ++k)
    inside += (ref.per[k] >= env.lo[k] && ref.per[k] <= env.hi[k]) ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(ref.per.size());
}

struct ratio_cdf_result {
  std::vector<double> ratios;  // ascending
  int excluded = 0;            // windows with zero mean reference
};

inline ratio_cdf_result per_ratio_cdf(const per_series& ref, const std::vector<double>& mean) {
  if (ref.per.size() != mean.size()) throw validation_error("per_ratio_cdf: length mismatch");
  ratio_cdf_result out;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    if (mean[k] > 0)
      out.ratios.push_back(ref.per[k] / mean[k]);
    else
      ++out.excluded;
  }
  std::sort(out.ratios.begin(), out.ratios.end());
  return out;
}

inline csv::table per_table(const per_series& s) {
  csv::table t;
  t.header = {"k", "t_center_s", "per"};
  for (std::size_t k = 0; k < s.per.size(); ++k)
    t.rows.push_back({static_cast<double>(k), s.t_center_s[k], s.per[k]});
  return t;
}

inline csv::table envelope_table(const per_envelope& e) {
  csv::table t;
  t.header = {"k", "t_center_s", "per_min", "per_mean", "per_max"};
  for (std::size_t k = 0; k < e.lo.size(); ++k)
    t.rows.push_back({static_cast<double>(k), e.t_center_s[k], e.lo[k], e.mean[k], e.hi[k]});
  return t;
}

}  // namespace vcsim::linksim
